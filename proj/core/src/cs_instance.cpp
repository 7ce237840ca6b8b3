#include "cbo/objective.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

namespace cbo {

CsInstance generate_cs_instance(Index d, Index m, Index s, double mu, double p, const RngStream& rng) {
    if (d < 1 || s < 1 || s > d || m < 1 || m > d) throw Error("invalid compressed-sensing dimensions");
    if (!(mu > 0.0)) throw Error("compressed-sensing mu must be positive");
    if (!(p > 0.0 && p <= 1.0)) throw Error("compressed-sensing exponent must lie in (0, 1]");

    auto gen = rng.engine(0, 0, Channel::Instance);
    std::normal_distribution<double> normal(0.0, 1.0);

    CsInstance inst;
    inst.mu = mu;
    inst.p = p;
    inst.sparsity = s;
    inst.A.resize(m, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < d; ++j) inst.A(i, j) = scale * normal(gen);
    }

    std::vector<Index> indices(static_cast<std::size_t>(d));
    std::iota(indices.begin(), indices.end(), Index{0});
    // Partial Fisher-Yates: the first s entries become the support.
    for (Index k = 0; k < s; ++k) {
        std::uniform_int_distribution<Index> pick(k, d - 1);
        std::swap(indices[static_cast<std::size_t>(k)], indices[static_cast<std::size_t>(pick(gen))]);
    }

    Vector truth = Vector::Zero(d);
    for (Index k = 0; k < s; ++k) {
        double v = normal(gen);
        if (std::abs(v) < 0.1) v = std::copysign(0.1, v);
        truth[indices[static_cast<std::size_t>(k)]] = v;
    }
    inst.b = inst.A * truth;
    inst.ground_truth = std::move(truth);
    return inst;
}

std::string format_cs_instance(const CsInstance& inst) {
    std::ostringstream out;
    out.precision(17);
    out << inst.dimension() << ' ' << inst.measurements() << ' ' << inst.sparsity << ' ' << inst.mu << ' '
        << inst.p << '\n';
    for (Index i = 0; i < inst.A.rows(); ++i) {
        for (Index j = 0; j < inst.A.cols(); ++j) out << (j ? " " : "") << inst.A(i, j);
        out << '\n';
    }
    for (Index i = 0; i < inst.b.size(); ++i) out << (i ? " " : "") << inst.b[i];
    out << '\n';
    if (inst.ground_truth) {
        const Vector& x = *inst.ground_truth;
        for (Index i = 0; i < x.size(); ++i) out << (i ? " " : "") << x[i];
        out << '\n';
    }
    return out.str();
}

CsInstance parse_cs_instance(const std::string& text) {
    std::istringstream in(text);
    Index d = 0, m = 0, s = 0;
    CsInstance inst;
    if (!(in >> d >> m >> s >> inst.mu >> inst.p)) throw Error("cs instance: malformed header");
    if (d < 1 || m < 1 || s < 0 || s > d) throw Error("cs instance: invalid header dimensions");
    inst.sparsity = s;
    inst.A.resize(m, d);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < d; ++j) {
            if (!(in >> inst.A(i, j))) throw Error("cs instance: truncated matrix");
        }
    }
    inst.b.resize(m);
    for (Index i = 0; i < m; ++i) {
        if (!(in >> inst.b[i])) throw Error("cs instance: truncated measurement vector");
    }
    double first = 0.0;
    if (in >> first) {
        Vector x(d);
        x[0] = first;
        for (Index i = 1; i < d; ++i) {
            if (!(in >> x[i])) throw Error("cs instance: truncated ground truth");
        }
        inst.ground_truth = std::move(x);
    }
    std::string trailing;
    if (in >> trailing) throw Error("cs instance: unexpected trailing data");
    return inst;
}

void write_cs_instance(const CsInstance& inst, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << format_cs_instance(inst);
    if (!out) throw Error("failed writing " + path);
}

CsInstance read_cs_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_cs_instance(buffer.str());
}

}  // namespace cbo
