#include "odrpo/policy_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace odrpo {

void save_policy_text(const TabularPolicy& policy, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_policy_text: cannot open '" + path + "'");
    }
    char buffer[64];
    for (int s = 0; s < policy.n_states(); ++s) {
        for (int a = 0; a < policy.n_actions(); ++a) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", policy.prob(s, a));
            out << buffer << (a + 1 == policy.n_actions() ? "\n" : " ");
        }
    }
    if (!out) {
        throw std::runtime_error("save_policy_text: write failed for '" + path + "'");
    }
}

TabularPolicy load_policy_text(const std::string& path, double row_sum_tol) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_policy_text: cannot open '" + path + "'");
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) {
            row.push_back(v);
        }
        if (!ls.eof()) {
            throw std::runtime_error("load_policy_text: non-numeric token in '" + path + "'");
        }
        if (!row.empty()) {
            rows.push_back(std::move(row));
        }
    }
    if (rows.empty()) {
        throw std::runtime_error("load_policy_text: no rows in '" + path + "'");
    }
    const std::size_t n_actions = rows.front().size();
    TabularPolicy policy(static_cast<int>(rows.size()), static_cast<int>(n_actions), 0.0);
    for (std::size_t s = 0; s < rows.size(); ++s) {
        if (rows[s].size() != n_actions) {
            throw std::runtime_error("load_policy_text: ragged rows in '" + path + "'");
        }
        double sum = 0.0;
        for (std::size_t a = 0; a < n_actions; ++a) {
            const double p = rows[s][a];
            if (!(p >= 0.0) || !std::isfinite(p)) {
                throw std::runtime_error("load_policy_text: row " + std::to_string(s) +
                                         " has a negative or non-finite probability");
            }
            policy.prob(static_cast<int>(s), static_cast<int>(a)) = p;
            sum += p;
        }
        if (std::abs(sum - 1.0) > row_sum_tol) {
            throw std::runtime_error("load_policy_text: row " + std::to_string(s) +
                                     " is not a probability distribution (sum=" +
                                     std::to_string(sum) + ")");
        }
    }
    return policy;
}

} // namespace odrpo
