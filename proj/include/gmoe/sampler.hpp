#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gmoe/json_io.hpp"
#include "gmoe/model.hpp"
#include "gmoe/rng.hpp"

namespace gmoe {

/// i.i.d. pairs (X_i, Y_i); row i of `x` goes with y(i).
struct Dataset {
    Matrix x;  ///< n x d
    Vector y;  ///< n
    std::uint64_t seed = 0;
    std::string source_label;

    std::size_t size() const noexcept { return static_cast<std::size_t>(y.size()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(x.cols()); }

    void validate() const {
        if (x.rows() != y.size()) throw DomainError("dataset: x rows differ from y length");
    }

    friend bool operator==(const Dataset& l, const Dataset& r) {
        return l.x.rows() == r.x.rows() && l.x.cols() == r.x.cols() && l.x == r.x && l.y == r.y &&
               l.seed == r.seed && l.source_label == r.source_label;
    }
};

/// Hierarchical draw: Z ~ Categorical(pi), X ~ N(c_Z, Gamma_Z),
/// Y ~ N(a_Z^T X + b_Z, nu_Z).
///
/// Stream order per row: one categorical draw for Z, then d standard
/// normals for X, then one standard normal for Y. One mt19937_64 seeded
/// with `seed` feeds all three.
inline Dataset sample(const MixingMeasure& g, std::size_t n, std::uint64_t seed,
                      std::string source_label = {}) {
    const auto d = static_cast<Eigen::Index>(g.dim());
    Dataset data;
    data.seed = seed;
    data.source_label = std::move(source_label);
    data.x.resize(static_cast<Eigen::Index>(n), d);
    data.y.resize(static_cast<Eigen::Index>(n));

    std::vector<Matrix> chol;
    for (const auto& comp : g.components()) chol.emplace_back(Eigen::LLT<Matrix>(comp.gamma).matrixL());

    Rng rng(seed);
    std::discrete_distribution<std::size_t> pick(g.weights().begin(), g.weights().end());
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = pick(rng);
        for (Eigen::Index t = 0; t < d; ++t) z(t) = normal(rng);
        const auto& comp = g.component(j);
        const Vector xi = comp.c + chol[j] * z;
        const auto row = static_cast<Eigen::Index>(i);
        data.x.row(row) = xi.transpose();
        data.y(row) = comp.a.dot(xi) + comp.b + std::sqrt(comp.nu) * normal(rng);
    }
    return data;
}

/// CSV with header x1..xd,y and 17-digit values.
inline std::string dataset_to_csv(const Dataset& data) {
    std::string out;
    for (std::size_t t = 0; t < data.dim(); ++t) out += "x" + std::to_string(t + 1) + ",";
    out += "y\n";
    for (Eigen::Index i = 0; i < data.y.size(); ++i) {
        for (Eigen::Index t = 0; t < data.x.cols(); ++t) {
            out += format_double(data.x(i, t));
            out += ',';
        }
        out += format_double(data.y(i));
        out += '\n';
    }
    return out;
}

inline Json dataset_sidecar(const Dataset& data) {
    Json j;
    j["seed"] = data.seed;
    j["source_label"] = data.source_label;
    j["n"] = data.size();
    j["d"] = data.dim();
    return j;
}

inline Dataset dataset_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DomainError("dataset csv: empty input");
    std::size_t cols = 1;
    for (char ch : line) cols += ch == ',';
    if (cols < 2) throw DomainError("dataset csv: need at least one x column and y");
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::size_t count = 0;
        while (std::getline(ls, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw DomainError("dataset csv: bad number '" + cell + "' on row " + std::to_string(rows + 1));
            }
            ++count;
        }
        if (count != cols) throw DomainError("dataset csv: row " + std::to_string(rows + 1) + " has wrong width");
        ++rows;
    }
    Dataset data;
    const auto d = static_cast<Eigen::Index>(cols - 1);
    data.x.resize(static_cast<Eigen::Index>(rows), d);
    data.y.resize(static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        for (Eigen::Index t = 0; t < d; ++t) data.x(ri, t) = values[r * cols + static_cast<std::size_t>(t)];
        data.y(ri) = values[r * cols + cols - 1];
    }
    return data;
}

}  // namespace gmoe
