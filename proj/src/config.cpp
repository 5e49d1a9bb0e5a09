#include "homsum/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "homsum/distributions.hpp"
#include "homsum/kernel.hpp"
#include "homsum/rng.hpp"

namespace homsum {

namespace {

using nlohmann::json;

const std::set<std::string> kFamilies = {"band", "scaled-band", "bump-band", "uniform-linear", "random"};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

const json& require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    return j;
}

std::uint64_t as_u64(const json& j, const std::string& key) {
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0))
        throw ConfigError("key '" + key + "' must be a nonnegative integer");
    return j.get<std::uint64_t>();
}

int as_int(const json& j, const std::string& key) {
    if (!j.is_number_integer()) throw ConfigError("key '" + key + "' must be an integer");
    return j.get<int>();
}

double as_double(const json& j, const std::string& key) {
    if (!j.is_number()) throw ConfigError("key '" + key + "' must be a number");
    return j.get<double>();
}

std::string as_string(const json& j, const std::string& key) {
    if (!j.is_string()) throw ConfigError("key '" + key + "' must be a string");
    return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& key) {
    if (!j.is_boolean()) throw ConfigError("key '" + key + "' must be true or false");
    return j.get<bool>();
}

std::filesystem::path resolve(const std::string& base, const std::string& file) {
    std::filesystem::path p(file);
    return p.is_absolute() ? p : std::filesystem::path(base) / p;
}

KernelSource parse_kernel(const json& j, const std::string& base) {
    require_object(j, "kernel entry");
    reject_unknown(j, {"file", "family", "N", "q", "k", "density", "seed"}, "kernel entry");
    KernelSource s;
    if (j.contains("file")) s.file = as_string(j["file"], "file");
    if (j.contains("family")) s.family = as_string(j["family"], "family");
    if (s.file.empty() == s.family.empty()) throw ConfigError("kernel entry needs exactly one of 'file' or 'family'");
    if (!s.file.empty()) {
        if (j.size() != 1) throw ConfigError("kernel entry with 'file' takes no other keys");
        if (!std::filesystem::exists(resolve(base, s.file)))
            throw ConfigError("kernel file not found: " + resolve(base, s.file).string());
        return s;
    }
    if (!kFamilies.count(s.family))
        throw ConfigError("unknown kernel family '" + s.family +
                          "' (expected band, scaled-band, bump-band, uniform-linear or random)");
    if (j.contains("N")) {
        s.n = as_int(j["N"], "N");
        if (*s.n < 2) throw ConfigError("key 'N' must be at least 2");
    }
    if (j.contains("q")) {
        s.q = as_int(j["q"], "q");
        if (s.q < 1) throw ConfigError("key 'q' must be positive");
        if (s.family != "random" && s.q != (s.family == "uniform-linear" ? 1 : 2))
            throw ConfigError("family '" + s.family + "' has a fixed degree");
    } else if (s.family == "uniform-linear") {
        s.q = 1;
    }
    if (j.contains("k")) {
        if (s.family != "bump-band") throw ConfigError("key 'k' applies only to bump-band");
        s.k = as_int(j["k"], "k");
        if (*s.k < 1) throw ConfigError("key 'k' must be at least 1");
    }
    if (j.contains("density")) {
        s.density = as_double(j["density"], "density");
        if (!(s.density > 0.0 && s.density <= 1.0)) throw ConfigError("key 'density' must lie in (0, 1]");
    }
    if (j.contains("seed")) s.seed = as_u64(j["seed"], "seed");
    return s;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    require_object(root, "config");
    reject_unknown(root,
                   {"id", "seed", "kernels", "laws", "target", "mc", "alpha", "ladder", "distance", "output",
                    "threads", "corpus"},
                   "config");
    ExperimentConfig c;
    c.base_dir = base_dir;
    if (!root.contains("seed")) throw ConfigError("missing mandatory key 'seed'");
    c.seed = as_u64(root["seed"], "seed");
    if (root.contains("id")) c.id = as_string(root["id"], "id");
    if (root.contains("kernels")) {
        if (!root["kernels"].is_array()) throw ConfigError("key 'kernels' must be a list");
        for (const auto& k : root["kernels"]) c.kernels.push_back(parse_kernel(k, base_dir));
    }
    if (root.contains("laws")) {
        const json& laws = root["laws"];
        if (laws.is_string()) {
            c.laws.push_back(laws.get<std::string>());
        } else if (laws.is_array()) {
            for (const auto& l : laws) c.laws.push_back(as_string(l, "laws"));
        } else {
            throw ConfigError("key 'laws' must be a string or a list of strings");
        }
        for (const auto& l : c.laws) {
            try {
                VariableSpec::parse(l);
            } catch (const ArgumentError& e) {
                throw ConfigError(e.what());
            }
        }
    }
    if (root.contains("target")) {
        const json& t = root["target"];
        if (!t.is_array()) throw ConfigError("key 'target' must be a list of rows");
        std::vector<std::vector<double>> rows;
        for (const auto& row : t) {
            if (!row.is_array()) throw ConfigError("key 'target' must be a list of rows");
            std::vector<double> r;
            for (const auto& v : row) r.push_back(as_double(v, "target"));
            if (r.size() != t.size()) throw ConfigError("key 'target' must be a square matrix");
            rows.push_back(std::move(r));
        }
        c.target = std::move(rows);
    }
    if (root.contains("mc")) {
        c.mc = as_u64(root["mc"], "mc");
        if (c.mc == 0) throw ConfigError("key 'mc' must be positive");
    }
    if (root.contains("alpha")) {
        c.alpha = as_double(root["alpha"], "alpha");
        if (!(c.alpha > 0.0)) throw ConfigError("key 'alpha' must be positive");
    }
    if (root.contains("ladder")) {
        if (!root["ladder"].is_array()) throw ConfigError("key 'ladder' must be a list of sizes");
        for (const auto& v : root["ladder"]) c.ladder.push_back(as_int(v, "ladder"));
        for (std::size_t i = 0; i < c.ladder.size(); ++i) {
            if (c.ladder[i] < 2) throw ConfigError("ladder sizes must be at least 2");
            if (i > 0 && c.ladder[i] <= c.ladder[i - 1]) throw ConfigError("ladder must increase strictly");
        }
    }
    if (root.contains("distance")) {
        const json& d = require_object(root["distance"], "key 'distance'");
        reject_unknown(d, {"estimator", "anchor_cap", "diagonal_anchors"}, "distance");
        if (d.contains("estimator")) {
            c.distance.estimator = as_string(d["estimator"], "estimator");
            if (c.distance.estimator != "orthant" && c.distance.estimator != "max")
                throw ConfigError("key 'estimator' must be orthant or max");
        }
        if (d.contains("anchor_cap")) c.distance.anchor_cap = as_u64(d["anchor_cap"], "anchor_cap");
        if (d.contains("diagonal_anchors"))
            c.distance.diagonal_anchors = as_bool(d["diagonal_anchors"], "diagonal_anchors");
    }
    if (root.contains("output")) c.output = as_string(root["output"], "output");
    if (root.contains("threads")) {
        const auto t = as_u64(root["threads"], "threads");
        if (t == 0) throw ConfigError("key 'threads' must be positive");
        c.threads = static_cast<unsigned>(t);
    }
    if (root.contains("corpus")) {
        const json& k = require_object(root["corpus"], "key 'corpus'");
        reject_unknown(k, {"pairs", "contexts", "kernels", "max_dim", "max_degree"}, "corpus");
        auto positive = [&](const char* key, int& field) {
            if (!k.contains(key)) return;
            field = as_int(k[key], key);
            if (field < 1) throw ConfigError(std::string("key '") + key + "' must be positive");
        };
        positive("pairs", c.corpus.pairs);
        positive("contexts", c.corpus.contexts);
        positive("kernels", c.corpus.kernels);
        positive("max_dim", c.corpus.max_dim);
        positive("max_degree", c.corpus.max_degree);
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto parent = std::filesystem::path(path).parent_path();
    return parse_config(buf.str(), parent.empty() ? "." : parent.string());
}

std::string write_config(const ExperimentConfig& c) {
    json root;
    root["id"] = c.id;
    root["seed"] = c.seed;
    if (!c.kernels.empty()) {
        json ks = json::array();
        for (const auto& s : c.kernels) {
            json k;
            if (!s.file.empty()) {
                k["file"] = s.file;
            } else {
                k["family"] = s.family;
                if (s.n) k["N"] = *s.n;
                k["q"] = s.q;
                if (s.k) k["k"] = *s.k;
                k["density"] = s.density;
                k["seed"] = s.seed;
            }
            ks.push_back(k);
        }
        root["kernels"] = ks;
    }
    if (c.laws.size() == 1)
        root["laws"] = c.laws.front();
    else if (!c.laws.empty())
        root["laws"] = c.laws;
    if (c.target) root["target"] = *c.target;
    root["mc"] = c.mc;
    root["alpha"] = c.alpha;
    if (!c.ladder.empty()) root["ladder"] = c.ladder;
    root["distance"] = {{"estimator", c.distance.estimator},
                        {"anchor_cap", c.distance.anchor_cap},
                        {"diagonal_anchors", c.distance.diagonal_anchors}};
    root["output"] = c.output;
    if (c.threads) root["threads"] = *c.threads;
    root["corpus"] = {{"pairs", c.corpus.pairs},
                      {"contexts", c.corpus.contexts},
                      {"kernels", c.corpus.kernels},
                      {"max_dim", c.corpus.max_dim},
                      {"max_degree", c.corpus.max_degree}};
    return root.dump(2) + "\n";
}

std::vector<VariableSpec> coordinate_laws(const ExperimentConfig& config, int n) {
    if (config.laws.empty()) throw ConfigError("config has no 'laws'");
    std::vector<VariableSpec> out;
    if (config.laws.size() == 1) {
        out.assign(n, VariableSpec::parse(config.laws.front()));
    } else if (static_cast<int>(config.laws.size()) == n) {
        for (const auto& l : config.laws) out.push_back(VariableSpec::parse(l));
    } else {
        throw ConfigError("law list has " + std::to_string(config.laws.size()) + " entries for N = " +
                          std::to_string(n));
    }
    return out;
}

HomSumSystem build_system(const ExperimentConfig& config, std::optional<int> n) {
    if (config.kernels.empty()) throw ConfigError("config has no 'kernels'");
    std::vector<SymmetricKernel> kernels;
    for (const auto& s : config.kernels) {
        if (!s.file.empty()) {
            kernels.push_back(load_kernel(resolve(config.base_dir, s.file).string()));
            continue;
        }
        const std::optional<int> size = n ? n : s.n;
        if (!size) throw ConfigError("family '" + s.family + "' needs 'N' or a ladder");
        const int m = *size;
        if (s.family == "band") {
            kernels.push_back(banded_kernel(m));
        } else if (s.family == "scaled-band") {
            kernels.push_back(scaled_band_kernel(m));
        } else if (s.family == "bump-band") {
            if (s.k) {
                if (*s.k > m) throw ConfigError("bump position k exceeds N");
                kernels.push_back(bump_band_kernel(m, *s.k - 1));
            } else {
                for (int k = 0; k < m; ++k) kernels.push_back(bump_band_kernel(m, k));
            }
        } else if (s.family == "uniform-linear") {
            kernels.push_back(uniform_linear_kernel(m));
        } else {
            std::mt19937_64 rng(splitmix64(s.seed ^ static_cast<std::uint64_t>(m)));
            kernels.push_back(random_kernel(s.q, m, s.density, rng));
        }
    }
    const int dim = kernels.front().dim();
    std::optional<Eigen::MatrixXd> target;
    if (config.target) {
        const auto& rows = *config.target;
        Eigen::MatrixXd t(rows.size(), rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < rows.size(); ++j) t(i, j) = rows[i][j];
        target = t;
    }
    return HomSumSystem(std::move(kernels), coordinate_laws(config, dim), std::move(target));
}

}  // namespace homsum
