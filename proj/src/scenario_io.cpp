#include "pdkf/scenario_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace pdkf {

using json = nlohmann::json;

namespace {

// a JSON value plus the path used to reach it, for diagnostics
class Field {
  public:
    Field(const json& j, std::string path, const std::string& source) : j_(j), path_(std::move(path)), src_(source) {}

    [[noreturn]] void fail(const std::string& msg) const {
        throw ValidationError(src_ + ": field '" + path_ + "': " + msg);
    }

    [[nodiscard]] bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

    [[nodiscard]] Field at(const char* key) const {
        if (!j_.is_object()) {
            fail("expected an object");
        }
        if (!j_.contains(key)) {
            throw ValidationError(src_ + ": field '" + child_path(key) + "': missing required field");
        }
        return {j_.at(key), child_path(key), src_};
    }

    [[nodiscard]] Field at(std::size_t idx) const {
        return {j_.at(idx), path_ + "[" + std::to_string(idx) + "]", src_};
    }

    [[nodiscard]] std::size_t size() const {
        if (!j_.is_array()) {
            fail("expected an array");
        }
        return j_.size();
    }

    [[nodiscard]] double number() const {
        if (!j_.is_number()) {
            fail("expected a number");
        }
        const double v = j_.get<double>();
        if (!std::isfinite(v)) {
            fail("expected a finite number");
        }
        return v;
    }

    [[nodiscard]] long long integer() const {
        if (!j_.is_number_integer()) {
            fail("expected an integer");
        }
        return j_.get<long long>();
    }

    [[nodiscard]] std::string string() const {
        if (!j_.is_string()) {
            fail("expected a string");
        }
        return j_.get<std::string>();
    }

    [[nodiscard]] Vec vector() const {
        if (j_.is_number()) {
            return Vec::Constant(1, number());
        }
        const std::size_t n = size();
        Vec v(static_cast<Eigen::Index>(n));
        for (std::size_t r = 0; r < n; ++r) {
            v(static_cast<Eigen::Index>(r)) = at(r).number();
        }
        return v;
    }

    // number -> 1x1; flat array -> row; array of rows; {"diag": [...]}
    [[nodiscard]] Mat matrix() const {
        if (j_.is_number()) {
            return Mat::Constant(1, 1, number());
        }
        if (j_.is_object()) {
            if (!has("diag")) {
                fail("matrix objects must have a 'diag' entry");
            }
            return at("diag").vector().asDiagonal();
        }
        const std::size_t rows = size();
        if (rows == 0) {
            fail("empty matrix");
        }
        if (!j_.at(0).is_array()) {
            return vector().transpose();
        }
        const std::size_t cols = at(std::size_t{0}).size();
        Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t r = 0; r < rows; ++r) {
            const Field row = at(r);
            if (row.size() != cols) {
                row.fail("ragged matrix row (expected " + std::to_string(cols) + " entries)");
            }
            for (std::size_t c = 0; c < cols; ++c) {
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row.at(c).number();
            }
        }
        return m;
    }

    [[nodiscard]] const std::string& path() const { return path_; }

  private:
    [[nodiscard]] std::string child_path(const char* key) const {
        return path_.empty() ? std::string(key) : path_ + "." + key;
    }

    const json& j_;
    std::string path_;
    const std::string& src_;
};

json to_json_matrix(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(row);
    }
    return rows;
}

json to_json_vector(const Vec& v) {
    json arr = json::array();
    for (Eigen::Index r = 0; r < v.size(); ++r) {
        arr.push_back(v(r));
    }
    return arr;
}

void check_dims(const Field& f, const Mat& m, Eigen::Index rows, Eigen::Index cols) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << "expected " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
        f.fail(os.str());
    }
}

std::vector<Mat> matrix_or_sequence(const Field& root, const char* single, const char* seq, int n) {
    std::vector<Mat> out;
    if (root.has(seq)) {
        const Field s = root.at(seq);
        for (std::size_t k = 0; k < s.size(); ++k) {
            out.push_back(s.at(k).matrix());
            check_dims(s.at(k), out.back(), n, n);
        }
        if (out.empty()) {
            s.fail("sequence must not be empty");
        }
    } else {
        const Field f = root.at(single);
        out.push_back(f.matrix());
        check_dims(f, out.back(), n, n);
    }
    return out;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(source + ": " + e.what());
    }
    const Field root(doc, "", source);
    if (!doc.is_object()) {
        root.fail("top level must be an object");
    }

    ScenarioConfig cfg;
    if (root.has("name")) {
        cfg.name = root.at("name").string();
    }
    SystemModel& sm = cfg.model;
    sm.n = static_cast<int>(root.at("n").integer());
    if (sm.n <= 0) {
        root.at("n").fail("must be positive");
    }
    const int n = sm.n;
    sm.A = matrix_or_sequence(root, "A", "A_seq", n);
    sm.Q = matrix_or_sequence(root, "Q", "Q_seq", n);
    if (root.has("Q_lo")) {
        sm.Q_lo = root.at("Q_lo").matrix();
        check_dims(root.at("Q_lo"), sm.Q_lo, n, n);
    }
    if (root.has("Q_hi")) {
        sm.Q_hi = root.at("Q_hi").matrix();
        check_dims(root.at("Q_hi"), sm.Q_hi, n, n);
    }
    sm.beta1 = root.at("beta1").number();
    sm.beta2 = root.at("beta2").number();
    sm.varpi = root.has("varpi") ? root.at("varpi").number() : 0.0;
    sm.x0_mean = root.has("x0_mean") ? root.at("x0_mean").vector() : Vec::Zero(n);
    if (sm.x0_mean.size() != n) {
        root.at("x0_mean").fail("expected " + std::to_string(n) + " entries");
    }
    sm.P0 = root.at("P0").matrix();
    check_dims(root.at("P0"), sm.P0, n, n);
    sm.x0_cov = root.has("x0_cov") ? root.at("x0_cov").matrix() : sm.P0;
    if (root.has("x0_cov")) {
        check_dims(root.at("x0_cov"), sm.x0_cov, n, n);
    }

    const Field agents = root.at("agents");
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const Field f = agents.at(i);
        AgentSpec a;
        a.H = f.at("H").matrix();
        if (a.H.cols() != n) {
            f.at("H").fail("expected " + std::to_string(n) + " columns");
        }
        a.R = f.at("R").matrix();
        check_dims(f.at("R"), a.R, a.H.rows(), a.H.rows());
        if (!linalg::is_positive_definite(a.R)) {
            f.at("R").fail("must be symmetric positive definite");
        }
        if (f.has("D")) {
            a.D = f.at("D").matrix();
            if (a.D.cols() != n) {
                f.at("D").fail("expected " + std::to_string(n) + " columns");
            }
            a.d = f.has("d") ? f.at("d").vector() : Vec::Zero(a.D.rows());
            if (a.d.size() != a.D.rows()) {
                f.at("d").fail("expected one entry per row of D");
            }
        } else {
            a.D = Mat::Zero(1, n);
            a.d = Vec::Zero(1);
        }
        if (f.has("epsilon")) {
            a.epsilon = f.at("epsilon").number();
        }
        if (f.has("delta")) {
            a.delta = f.at("delta").number();
        }
        if (f.has("theta")) {
            a.theta = f.at("theta").number();
        }
        if (f.has("x0")) {
            a.x0 = f.at("x0").vector();
            if (a.x0.size() != n) {
                f.at("x0").fail("expected " + std::to_string(n) + " entries");
            }
        }
        if (f.has("P0")) {
            a.P0 = f.at("P0").matrix();
            check_dims(f.at("P0"), a.P0, n, n);
        }
        try {
            a.validate(n);
        } catch (const ValidationError& e) {
            f.fail(e.what());
        }
        cfg.agents.push_back(std::move(a));
    }
    const int N = static_cast<int>(cfg.agents.size());
    if (N == 0) {
        agents.fail("at least one agent is required");
    }

    const Field w = root.at("weights");
    const std::string mode = w.at("mode").string();
    try {
        if (mode == "metropolis") {
            std::vector<std::pair<int, int>> edges;
            const Field e = w.at("edges");
            for (std::size_t k = 0; k < e.size(); ++k) {
                const Field pr = e.at(k);
                if (pr.size() != 2) {
                    pr.fail("edges are [from, to] pairs");
                }
                edges.emplace_back(static_cast<int>(pr.at(std::size_t{0}).integer()), static_cast<int>(pr.at(std::size_t{1}).integer()));
            }
            cfg.topo = metropolis_weights(N, edges);
        } else if (mode == "explicit") {
            const Mat m = w.at("matrix").matrix();
            check_dims(w.at("matrix"), m, N, N);
            cfg.topo = Topology::from_weights(m);
        } else {
            w.at("mode").fail("expected 'metropolis' or 'explicit'");
        }
        cfg.topo.validate();
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        if (msg.rfind(source, 0) == 0) {
            throw;
        }
        w.fail(msg);
    }

    if (root.has("sim")) {
        const Field s = root.at("sim");
        if (s.has("horizon")) {
            cfg.horizon = static_cast<int>(s.at("horizon").integer());
        }
        if (s.has("L")) {
            cfg.L = static_cast<int>(s.at("L").integer());
        }
        if (s.has("mode")) {
            try {
                cfg.mode = parse_mode(s.at("mode").string());
            } catch (const ValidationError& e) {
                s.at("mode").fail(e.what());
            }
        }
        if (s.has("trials")) {
            cfg.trials = static_cast<int>(s.at("trials").integer());
        }
        if (s.has("seed")) {
            const long long seed = s.at("seed").integer();
            if (seed < 0) {
                s.at("seed").fail("must be nonnegative");
            }
            cfg.seed = static_cast<std::uint64_t>(seed);
        }
        if (s.has("checkpoints")) {
            cfg.checkpoints.clear();
            const Field c = s.at("checkpoints");
            for (std::size_t k = 0; k < c.size(); ++k) {
                cfg.checkpoints.push_back(static_cast<int>(c.at(k).integer()));
            }
        }
        if (s.has("Q_sim")) {
            cfg.Q_sim = s.at("Q_sim").matrix();
            check_dims(s.at("Q_sim"), cfg.Q_sim, n, n);
        }
        if (s.has("R_sim")) {
            const Field r = s.at("R_sim");
            if (r.size() != static_cast<std::size_t>(N)) {
                r.fail("expected one entry per agent");
            }
            for (std::size_t i = 0; i < r.size(); ++i) {
                cfg.R_sim.push_back(r.at(i).matrix());
                check_dims(r.at(i), cfg.R_sim.back(), cfg.agents[i].H.rows(), cfg.agents[i].H.rows());
            }
        }
    }
    try {
        cfg.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(source + ": " + e.what());
    }
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open scenario file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path);
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
    json j;
    j["name"] = cfg.name;
    j["n"] = cfg.model.n;
    if (cfg.model.A.size() == 1) {
        j["A"] = to_json_matrix(cfg.model.A.front());
    } else {
        j["A_seq"] = json::array();
        for (const auto& a : cfg.model.A) {
            j["A_seq"].push_back(to_json_matrix(a));
        }
    }
    if (cfg.model.Q.size() == 1) {
        j["Q"] = to_json_matrix(cfg.model.Q.front());
    } else {
        j["Q_seq"] = json::array();
        for (const auto& q : cfg.model.Q) {
            j["Q_seq"].push_back(to_json_matrix(q));
        }
    }
    if (cfg.model.Q_lo.size() > 0) {
        j["Q_lo"] = to_json_matrix(cfg.model.Q_lo);
    }
    if (cfg.model.Q_hi.size() > 0) {
        j["Q_hi"] = to_json_matrix(cfg.model.Q_hi);
    }
    j["beta1"] = cfg.model.beta1;
    j["beta2"] = cfg.model.beta2;
    j["varpi"] = cfg.model.varpi;
    j["x0_mean"] = to_json_vector(cfg.model.x0_mean);
    j["x0_cov"] = to_json_matrix(cfg.model.x0_cov);
    j["P0"] = to_json_matrix(cfg.model.P0);
    j["agents"] = json::array();
    for (const auto& a : cfg.agents) {
        json ja;
        ja["H"] = to_json_matrix(a.H);
        ja["R"] = to_json_matrix(a.R);
        ja["D"] = to_json_matrix(a.D);
        ja["d"] = to_json_vector(a.d);
        ja["epsilon"] = a.epsilon;
        ja["delta"] = a.delta;
        ja["theta"] = a.theta;
        if (a.x0.size() > 0) {
            ja["x0"] = to_json_vector(a.x0);
        }
        if (a.P0.size() > 0) {
            ja["P0"] = to_json_matrix(a.P0);
        }
        j["agents"].push_back(ja);
    }
    j["weights"] = {{"mode", "explicit"}, {"matrix", to_json_matrix(cfg.topo.weights)}};
    json s;
    s["horizon"] = cfg.horizon;
    s["L"] = cfg.L;
    s["mode"] = mode_name(cfg.mode);
    s["trials"] = cfg.trials;
    s["seed"] = cfg.seed;
    s["checkpoints"] = cfg.checkpoints;
    if (cfg.Q_sim.size() > 0) {
        s["Q_sim"] = to_json_matrix(cfg.Q_sim);
    }
    if (!cfg.R_sim.empty()) {
        s["R_sim"] = json::array();
        for (const auto& r : cfg.R_sim) {
            s["R_sim"].push_back(to_json_matrix(r));
        }
    }
    j["sim"] = s;
    return j.dump(2);
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_metrics_csv(std::ostream& os, const RunMetrics& m) {
    os << "step,mse,trace_p,lambda_running,max_constraint_residual,mean_error_norm\n";
    for (std::size_t k = 0; k < m.mse.size(); ++k) {
        os << k << ',' << format_double(m.mse[k]) << ',' << format_double(m.trace_p[k]) << ','
           << format_double(m.lambda_running[k]) << ',' << format_double(m.constraint_residual[k]) << ','
           << format_double(m.mean_error_norm[k]) << '\n';
    }
}

void write_triggers_csv(std::ostream& os, const RunMetrics& m) {
    os << "step,agent,g,fired\n";
    for (const auto& r : m.trigger_log) {
        os << r.step << ',' << r.agent << ',' << format_double(r.g) << ',' << (r.fired ? 1 : 0) << '\n';
    }
}

}  // namespace pdkf
