#pragma once

// JSON run configuration, matrix documents, certificate serialization and CSV output.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kp/bounds.hpp"
#include "kp/core.hpp"
#include "kp/kernel_core.hpp"
#include "kp/measure.hpp"
#include "kp/perturbation.hpp"
#include "kp/spacetime.hpp"

namespace kp {

/// Malformed or inconsistent configuration.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace config {

using ojson = nlohmann::ordered_json;

inline ojson parse(const std::string& text, const std::string& origin = "<string>") {
    try {
        return ojson::parse(text);
    } catch (const ojson::parse_error& e) {
        throw config_error(origin + ": malformed JSON: " + e.what());
    }
}

inline ojson load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

namespace detail {

inline double number(const ojson& j, const char* key, double fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    if (!j[key].is_number()) throw config_error(std::string("'") + key + "' must be a number");
    return j[key].get<double>();
}

inline double required_number(const ojson& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw config_error(where + ": missing '" + key + "'");
    return number(j, key, 0);
}

/// null stands for an infinite end.
inline double bound_value(const ojson& v, double inf_value) {
    if (v.is_null()) return inf_value;
    if (!v.is_number()) throw config_error("interval ends must be numbers or null");
    return v.get<double>();
}

inline std::vector<double> numbers(const ojson& j, const char* key) {
    std::vector<double> out;
    if (!j.contains(key)) return out;
    if (!j[key].is_array()) throw config_error(std::string("'") + key + "' must be an array");
    for (const auto& v : j[key]) {
        if (!v.is_number()) throw config_error(std::string("'") + key + "' must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Measures

inline Density parse_density(const ojson& j) {
    if (j.is_null()) return Density::none();
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw config_error("density needs a string 'kind'");
    const std::string kind = j["kind"];
    Density d;
    if (kind == "none")
        d = Density::none();
    else if (kind == "const")
        d = Density::constant(detail::required_number(j, "lambda", "const density"));
    else if (kind == "q0")
        d = Density::q0(detail::required_number(j, "c", "q0 density"), detail::required_number(j, "p", "q0 density"));
    else if (kind == "power")
        d = Density::power(detail::required_number(j, "eps", "power density"), detail::number(j, "scale", 1));
    else
        throw config_error("unknown density kind '" + kind + "'");
    try {
        d.validate();
    } catch (const input_error& e) {
        throw config_error(e.what());
    }
    return d;
}

/// "support": [a, b] is the closed time interval; null ends are infinite.
inline Interval parse_support(const ojson& j) {
    if (j.is_null()) return Interval::all();
    if (!j.is_array() || j.size() != 2) throw config_error("'support' must be [a, b]");
    const double a = detail::bound_value(j[0], -inf), b = detail::bound_value(j[1], inf);
    if (!(a <= b)) throw config_error("'support' needs a <= b");
    return {a, b, std::isfinite(a), std::isfinite(b)};
}

inline PerturbingMeasure parse_measure(const ojson& j) {
    if (j.is_null()) return PerturbingMeasure::zero();
    if (!j.is_object()) throw config_error("'measure' must be an object");
    const Density d = j.contains("density") ? parse_density(j["density"]) : Density::none();
    std::vector<Atom> atoms;
    if (j.contains("atoms")) {
        if (!j["atoms"].is_array()) throw config_error("'atoms' must be an array");
        for (const auto& a : j["atoms"]) {
            if (!a.is_object()) throw config_error("each atom must be {\"u\": .., \"eta\": ..}");
            atoms.push_back({detail::required_number(a, "u", "atom"), detail::required_number(a, "eta", "atom")});
        }
        std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.u < b.u; });
    }
    const Interval sup = j.contains("support") ? parse_support(j["support"]) : Interval::all();
    try {
        return PerturbingMeasure(d, std::move(atoms), sup);
    } catch (const input_error& e) {
        throw config_error(e.what());
    }
}

// ---------------------------------------------------------------------------
// Matrix documents {"n", "entries", "sets", "f"}; sets form the absorbing
// chain in document order and indices are 0-based.

struct MatrixDoc {
    MatrixKernel kernel;
    std::vector<std::string> set_names;
    std::vector<StateSet> sets;
    std::vector<double> f;  // all ones when absent
};

inline MatrixDoc parse_matrix(const ojson& j) {
    if (!j.is_object()) throw config_error("matrix document must be an object");
    if (!j.contains("n") || !j["n"].is_number_unsigned()) throw config_error("matrix 'n' must be a positive integer");
    const auto n = j["n"].get<std::size_t>();
    if (n == 0) throw config_error("matrix 'n' must be a positive integer");
    if (!j.contains("entries") || !j["entries"].is_array() || j["entries"].size() != n)
        throw config_error("matrix 'entries' must hold n rows");
    std::vector<std::vector<double>> rows;
    for (const auto& r : j["entries"]) {
        if (!r.is_array() || r.size() != n) throw config_error("matrix rows must have n entries");
        std::vector<double> row;
        for (const auto& v : r) {
            if (!v.is_number()) throw config_error("matrix entries must be numbers");
            row.push_back(v.get<double>());
        }
        rows.push_back(std::move(row));
    }
    MatrixDoc doc;
    try {
        doc.kernel = MatrixKernel::from_rows(rows);
    } catch (const input_error& e) {
        throw config_error(e.what());
    }
    if (j.contains("sets")) {
        if (!j["sets"].is_object()) throw config_error("matrix 'sets' must be an object of index lists");
        for (const auto& [name, idx] : j["sets"].items()) {
            if (!idx.is_array()) throw config_error("set '" + name + "' must be an index list");
            std::vector<std::size_t> members;
            for (const auto& v : idx) {
                if (!v.is_number_unsigned()) throw config_error("set '" + name + "' must hold nonnegative integers");
                members.push_back(v.get<std::size_t>());
            }
            try {
                doc.sets.push_back(StateSet::of(n, members));
            } catch (const input_error& e) {
                throw config_error("set '" + name + "': " + e.what());
            }
            doc.set_names.push_back(name);
        }
    }
    if (j.contains("f")) {
        doc.f = detail::numbers(j, "f");
        if (doc.f.size() != n) throw config_error("matrix 'f' must have n entries");
        for (double v : doc.f)
            if (!(v > 0) || !std::isfinite(v)) throw config_error("matrix 'f' must be positive");
    } else {
        doc.f.assign(n, 1.0);
    }
    return doc;
}

inline ojson matrix_json(const MatrixDoc& doc) {
    ojson j;
    const std::size_t n = doc.kernel.size();
    j["n"] = n;
    ojson rows = ojson::array();
    for (std::size_t i = 0; i < n; ++i) {
        ojson r = ojson::array();
        for (double v : doc.kernel.row(i)) r.push_back(v);
        rows.push_back(r);
    }
    j["entries"] = rows;
    ojson sets = ojson::object();
    for (std::size_t k = 0; k < doc.sets.size(); ++k) sets[doc.set_names[k]] = doc.sets[k].members();
    j["sets"] = sets;
    j["f"] = doc.f;
    return j;
}

// ---------------------------------------------------------------------------
// Run configuration

enum class SlicingMode { time_uniform, diagonal_level, intervals };

struct SlicingSpec {
    SlicingMode mode = SlicingMode::time_uniform;
    double h = 0;
    double r = 0;                     // left end for time slicings
    std::optional<double> eta_target; // diagonal mode: h = solve_h(c, p, eta_target)
    std::vector<Interval> intervals;  // I_1 (rightmost) first
};

struct RunConfig {
    std::string kernel = "gaussian";
    std::size_t d = 1;
    PerturbingMeasure measure;
    std::optional<SlicingSpec> slicing;
    double t = 1;
    double y = 0;
    std::vector<double> s_samples{0.0};
    std::vector<double> x_samples{0.0};
    std::size_t s_per_slice = 4;
    SeriesOptions series;
    std::optional<double> eta;
    std::optional<double> beta;
    double oracle_tol = 1e-3;
    std::vector<double> kato_h;
    std::optional<double> five_p;  // 5P constant for Kato certificates
    std::optional<double> kato_certify_h;
    std::uint64_t seed = 7;
    std::string out;
    std::optional<MatrixDoc> matrix;

    KernelPtr make_kernel() const { return kp::make_kernel(kernel, d); }

    std::vector<SeriesTarget> targets() const {
        std::vector<SeriesTarget> out_t;
        for (double s : s_samples)
            for (double x : x_samples) out_t.push_back({s, x});
        return out_t;
    }
};

inline SlicingSpec parse_slicing(const ojson& j) {
    if (!j.is_object() || !j.contains("mode") || !j["mode"].is_string())
        throw config_error("'slicing' needs a string 'mode'");
    const std::string mode = j["mode"];
    SlicingSpec s;
    if (mode == "time-uniform") {
        s.mode = SlicingMode::time_uniform;
        s.h = detail::required_number(j, "h", "time-uniform slicing");
        s.r = detail::required_number(j, "r", "time-uniform slicing");
        if (!(s.h > 0)) throw config_error("slicing 'h' must be > 0");
    } else if (mode == "diagonal-level") {
        s.mode = SlicingMode::diagonal_level;
        if (j.contains("eta_target")) s.eta_target = detail::number(j, "eta_target", 0);
        s.h = detail::number(j, "h", 0);
        if (!s.eta_target && !(s.h > 0)) throw config_error("diagonal-level slicing needs 'h' > 0 or 'eta_target'");
    } else if (mode == "intervals") {
        s.mode = SlicingMode::intervals;
        if (!j.contains("intervals") || !j["intervals"].is_array() || j["intervals"].empty())
            throw config_error("'intervals' must be a nonempty list of [a, b]");
        for (const auto& iv : j["intervals"]) {
            if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number())
                throw config_error("each interval must be [a, b]");
            s.intervals.push_back(Interval::left_closed(iv[0].get<double>(), iv[1].get<double>()));
        }
        s.r = s.intervals.back().lo;
    } else {
        throw config_error("unknown slicing mode '" + mode + "'");
    }
    return s;
}

inline RunConfig parse_run_config(const ojson& j) {
    if (!j.is_object()) throw config_error("config must be a JSON object");
    RunConfig c;
    try {
        if (j.contains("kernel")) {
            const auto& k = j["kernel"];
            if (k.is_string()) {
                c.kernel = k.get<std::string>();
            } else if (k.is_object()) {
                if (!k.contains("name") || !k["name"].is_string()) throw config_error("kernel needs a string 'name'");
                c.kernel = k["name"].get<std::string>();
                if (k.contains("d")) {
                    if (!k["d"].is_number_unsigned()) throw config_error("kernel 'd' must be a positive integer");
                    c.d = k["d"].get<std::size_t>();
                }
            } else {
                throw config_error("'kernel' must be a name or {\"name\", \"d\"}");
            }
        }
        if (j.contains("measure")) c.measure = parse_measure(j["measure"]);
        if (j.contains("slicing")) c.slicing = parse_slicing(j["slicing"]);
        if (j.contains("target")) {
            const auto& tg = j["target"];
            if (!tg.is_object()) throw config_error("'target' must be {\"t\": .., \"y\": ..}");
            c.t = detail::number(tg, "t", c.t);
            c.y = detail::number(tg, "y", c.y);
        }
        if (j.contains("samples")) {
            const auto& sm = j["samples"];
            if (!sm.is_object()) throw config_error("'samples' must be {\"s\": [..], \"x\": [..]}");
            if (sm.contains("s")) c.s_samples = detail::numbers(sm, "s");
            if (sm.contains("x")) c.x_samples = detail::numbers(sm, "x");
            if (sm.contains("s_per_slice")) c.s_per_slice = std::size_t(detail::number(sm, "s_per_slice", 4));
            if (c.x_samples.empty()) throw config_error("'samples.x' must not be empty");
        }
        c.series.quad_tol = detail::number(j, "quad_rel_tol", detail::number(j, "quad_tol", c.series.quad_tol));
        if (!(c.series.quad_tol > 0)) throw config_error("quadrature tolerance must be > 0");
        c.series.quad_abs_tol = detail::number(j, "quad_abs_tol", 0);
        if (!(c.series.quad_abs_tol >= 0)) throw config_error("'quad_abs_tol' must be >= 0");
        c.series.max_terms = std::size_t(detail::number(j, "max_terms", double(c.series.max_terms)));
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            GridSpec& gs = c.series.grid;
            gs.u_order = int(detail::number(g, "u_order", gs.u_order));
            gs.z_order = int(detail::number(g, "z_order", gs.z_order));
            gs.max_z_panels = int(detail::number(g, "max_z_panels", gs.max_z_panels));
        }
        if (j.contains("semantics")) {
            const std::string sem = j["semantics"].get<std::string>();
            if (sem == "strict")
                c.series.semantics = AtomSemantics::strict;
            else if (sem == "alternative")
                c.series.semantics = AtomSemantics::alternative;
            else
                throw config_error("unknown semantics '" + sem + "'");
        }
        if (j.contains("eta")) c.eta = detail::number(j, "eta", 0);
        if (j.contains("beta")) c.beta = detail::number(j, "beta", 0);
        c.oracle_tol = detail::number(j, "oracle_tol", c.oracle_tol);
        if (j.contains("kato")) {
            const auto& k = j["kato"];
            c.kato_h = detail::numbers(k, "h");
            if (k.contains("five_p")) c.five_p = detail::number(k, "five_p", 0);
            if (k.contains("certify_h")) c.kato_certify_h = detail::number(k, "certify_h", 0);
        }
        if (j.contains("seed")) {
            if (!j["seed"].is_number_unsigned()) throw config_error("'seed' must be a nonnegative integer");
            c.seed = j["seed"].get<std::uint64_t>();
        }
        if (j.contains("out")) c.out = j["out"].get<std::string>();
        if (j.contains("matrix")) c.matrix = parse_matrix(j["matrix"]);
    } catch (const ojson::exception& e) {
        throw config_error(std::string("config type error: ") + e.what());
    }
    if (!c.matrix) {
        try {
            (void)c.make_kernel();
        } catch (const input_error& e) {
            throw config_error(e.what());
        }
    }
    if (c.slicing && c.slicing->mode == SlicingMode::diagonal_level) {
        if (c.kernel != "kappa") throw config_error("diagonal-level slicing is only defined for the kappa kernel");
        if (c.measure.density().kind != DensityKind::q0 || !c.measure.atoms().empty())
            throw config_error("diagonal-level slicing needs an atomless q0 density");
    }
    return c;
}

// ---------------------------------------------------------------------------
// Output

/// Fixed-format number for CSV and JSON-adjacent text.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline ojson certificate_json(const BoundCertificate& c) {
    ojson j;
    j["slice"] = c.slice;
    j["eta"] = c.eta;
    j["beta"] = c.beta;
    j["bound"] = c.bound;
    j["measured_ratio"] = c.measured_ratio;
    j["status"] = to_string(c.status);
    j["samples"] = c.samples;
    j["truncation"] = c.truncation;
    j["margin"] = c.margin;
    j["provenance"] = c.provenance;
    return j;
}

inline ojson certificates_json(const std::vector<BoundCertificate>& certs) {
    ojson a = ojson::array();
    for (const auto& c : certs) a.push_back(certificate_json(c));
    return a;
}

class Csv {
public:
    explicit Csv(std::vector<std::string> header) : cols_(header.size()) { line(header); }

    template <class... Cells>
    void row(const Cells&... cells) {
        static_assert(sizeof...(Cells) > 0);
        std::vector<std::string> v{cell(cells)...};
        if (v.size() != cols_) throw std::logic_error("csv row width mismatch");
        line(v);
    }

    const std::string& text() const { return text_; }

    void write(const std::filesystem::path& path) const {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << text_;
    }

private:
    static std::string cell(double v) { return fmt(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(const char* v) { return v; }
    static std::string cell(const std::string& v) { return v; }

    void line(const std::vector<std::string>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) text_ += ',';
            text_ += v[i];
        }
        text_ += '\n';
    }

    std::size_t cols_;
    std::string text_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline void write_json(const std::filesystem::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace config
}  // namespace kp
