#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace switchback {

// Cumulative effect curve: delta_cum at treatment durations 1..H minutes,
// with delta_cum(0) defined as 0. The value at H is the GATE implied by the
// curve.
struct CecCurve {
    int horizon = 0;             // H
    std::vector<double> values;  // values[j-1] = delta_cum(j), j = 1..H
    std::optional<std::vector<double>> variances;

    CecCurve() = default;
    CecCurve(int H, std::vector<double> v) : horizon(H), values(std::move(v)) {
        if (horizon < 1 || static_cast<int>(values.size()) != horizon)
            throw std::invalid_argument("CecCurve: need H >= 1 values");
    }

    double at(int dt) const {  // delta_cum(dt), dt in [0, H]
        if (dt <= 0) return 0.0;
        if (dt >= horizon) return values.back();
        return values[static_cast<std::size_t>(dt) - 1];
    }

    double gate() const { return values.back(); }

    double increment(int u) const {  // delta_cum(u+1) - delta_cum(u), u in [0, H-1]
        return at(u + 1) - at(u);
    }

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("CecCurve: cannot write " + path);
        out << (variances ? "dt_min,delta_cum,variance\n" : "dt_min,delta_cum\n");
        out.precision(17);
        for (int j = 1; j <= horizon; ++j) {
            out << j << ',' << values[j - 1];
            if (variances) out << ',' << (*variances)[j - 1];
            out << '\n';
        }
    }

    static CecCurve read_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("CecCurve: cannot read " + path);
        std::string line;
        if (!std::getline(in, line)) throw std::runtime_error("CecCurve: empty file " + path);
        bool has_var = line.find("variance") != std::string::npos;
        std::vector<double> vals, vars;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string tok;
            std::getline(ss, tok, ',');
            std::getline(ss, tok, ',');
            vals.push_back(std::stod(tok));
            if (has_var && std::getline(ss, tok, ',')) vars.push_back(std::stod(tok));
        }
        CecCurve c(static_cast<int>(vals.size()), std::move(vals));
        if (has_var && vars.size() == c.values.size()) c.variances = std::move(vars);
        return c;
    }
};

}  // namespace switchback
