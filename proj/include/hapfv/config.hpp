#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hapfv/studies.hpp"

namespace hapfv {

struct StudySpec {
    std::string kind; // "epsilon" or "refinement"
    std::vector<int> levels;
    std::vector<double> eps_list;
    double metric_p = 3.0;
    double min_order = 0.8;
};

struct WeakcheckSpec {
    int k = 10;              // library size
    double threshold = 1e-2; // max normalized residual for exit 0
    std::string audit = "generating";
};

struct FitSpec {
    int fields = 100; // seeded battery size
};

// Everything a CLI invocation needs, assembled from one key=value file.
struct AppConfig {
    Scenario scenario;
    std::string output_dir = "out";
    StudySpec study;
    WeakcheckSpec weakcheck;
    FitSpec fit;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline double to_num(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (...) {
        throw ConfigError("key " + key + " needs a number, got '" + v + "'");
    }
}

inline long to_int(const std::string& v, const std::string& key) {
    const double x = to_num(v, key);
    const long i = static_cast<long>(x);
    if (static_cast<double>(i) != x)
        throw ConfigError("key " + key + " needs an integer, got '" + v + "'");
    return i;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = s.find(sep, pos);
        if (next == std::string::npos) {
            out.push_back(s.substr(pos));
            break;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
    return out;
}

inline Domain parse_domain(const std::string& v) {
    const auto parts = split(v, ':');
    auto num = [&](std::size_t i) { return to_num(parts.at(i), "grid.domain"); };
    if (parts[0] == "rect") {
        if (parts.size() != 5) throw ConfigError("grid.domain rect needs rect:x0:y0:x1:y1");
        return Domain::rectangle(num(1), num(2), num(3), num(4));
    }
    if (parts[0] == "disk") {
        if (parts.size() != 4) throw ConfigError("grid.domain disk needs disk:cx:cy:radius");
        return Domain::disk(num(1), num(2), num(3));
    }
    throw ConfigError("unknown domain kind: " + parts[0]);
}

inline TensorKind parse_tensor_kind(const std::string& v) {
    if (v == "constant") return TensorKind::Constant;
    if (v == "radial_power") return TensorKind::RadialPower;
    if (v == "axis_power") return TensorKind::AxisPower;
    if (v == "imported") return TensorKind::Imported;
    throw ConfigError("unknown tensor kind: " + v);
}

} // namespace detail

// Reads key=value lines: '#' starts a comment, blank lines are skipped,
// duplicate keys are rejected. Returns pairs in file order.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (!seen.insert(key).second) throw ConfigError("duplicate key: " + key);
        pairs.emplace_back(key, value);
    }
    return pairs;
}

// Builds the config: scenario.name selects a preset base (or "custom"),
// every other key overrides one field. Unknown keys are rejected.
inline AppConfig build_config(const std::vector<std::pair<std::string, std::string>>& pairs) {
    AppConfig cfg;
    for (const auto& [k, v] : pairs) {
        if (k == "scenario.name") {
            cfg.scenario = (v == "custom") ? Scenario{} : make_preset(v);
            cfg.scenario.name = v;
        }
    }
    for (const auto& [k, v] : pairs) {
        Scenario& sc = cfg.scenario;
        if (k == "scenario.name") continue;
        else if (k == "tensor.kind") sc.tensor.kind = detail::parse_tensor_kind(v);
        else if (k == "tensor.s") sc.tensor.s = detail::to_num(v, k);
        else if (k == "tensor.d11") sc.tensor.constant.a11 = detail::to_num(v, k);
        else if (k == "tensor.d12") sc.tensor.constant.a12 = detail::to_num(v, k);
        else if (k == "tensor.d22") sc.tensor.constant.a22 = detail::to_num(v, k);
        else if (k == "tensor.csv") sc.tensor.csv_path = v;
        else if (k == "params.chi") sc.params.chi = detail::to_num(v, k);
        else if (k == "params.mu") sc.params.mu = detail::to_num(v, k);
        else if (k == "params.r") sc.params.r = detail::to_num(v, k);
        else if (k == "params.eps") sc.params.eps = detail::to_num(v, k);
        else if (k == "params.beta") sc.beta = detail::to_num(v, k);
        else if (k == "params.T") sc.params.T = detail::to_num(v, k);
        else if (k == "params.cfl") sc.params.cfl = detail::to_num(v, k);
        else if (k == "params.dt_max") sc.params.dt_max = detail::to_num(v, k);
        else if (k == "grid.nx") sc.nx = static_cast<int>(detail::to_int(v, k));
        else if (k == "grid.ny") sc.ny = static_cast<int>(detail::to_int(v, k));
        else if (k == "grid.domain") sc.domain = detail::parse_domain(v);
        else if (k == "init.u0") sc.u0 = InitSpec::parse(v);
        else if (k == "init.w0") sc.w0 = InitSpec::parse(v);
        else if (k == "output.dir") cfg.output_dir = v;
        else if (k == "output.stride") sc.frames = static_cast<int>(detail::to_int(v, k));
        else if (k == "seed") sc.seed = static_cast<std::uint64_t>(detail::to_int(v, k));
        else if (k == "study.kind") cfg.study.kind = v;
        else if (k == "study.levels") {
            for (const std::string& tok : detail::split(v, ','))
                cfg.study.levels.push_back(static_cast<int>(detail::to_int(detail::trim(tok), k)));
        } else if (k == "study.eps_list") {
            for (const std::string& tok : detail::split(v, ','))
                cfg.study.eps_list.push_back(detail::to_num(detail::trim(tok), k));
        } else if (k == "study.metric_p") cfg.study.metric_p = detail::to_num(v, k);
        else if (k == "study.min_order") cfg.study.min_order = detail::to_num(v, k);
        else if (k == "weakcheck.k") cfg.weakcheck.k = static_cast<int>(detail::to_int(v, k));
        else if (k == "weakcheck.threshold") cfg.weakcheck.threshold = detail::to_num(v, k);
        else if (k == "weakcheck.audit") {
            if (v != "generating" && v != "target")
                throw ConfigError("weakcheck.audit must be 'generating' or 'target'");
            cfg.weakcheck.audit = v;
        } else if (k == "fit.fields") cfg.fit.fields = static_cast<int>(detail::to_int(v, k));
        else throw ConfigError("unknown key: " + k);
    }
    validate_scenario(cfg.scenario);
    return cfg;
}

inline AppConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path);
    return build_config(parse_config_text(f));
}

} // namespace hapfv
