#include "kehsim/config.hpp"

#include "kehsim/errors.hpp"
#include "kehsim/io.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <set>
#include <sstream>

namespace kehsim {

namespace {

/// A mapping being read, tracking which keys were consumed so leftovers can
/// be reported.
class Section {
public:
    Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) {
            throw ConfigError("expected a mapping", path_.empty() ? "<root>" : path_);
        }
    }

    [[nodiscard]] std::string key(const std::string& name) const {
        return path_.empty() ? name : path_ + "." + name;
    }

    [[nodiscard]] YAML::Node get(const std::string& name) {
        used_.insert(name);
        if (!node_ || !node_.IsMap()) {
            return YAML::Node();
        }
        return node_[name];
    }

    [[nodiscard]] bool present(const std::string& name) {
        const YAML::Node n = get(name);
        return n && !n.IsNull();
    }

    double number(const std::string& name, double fallback) {
        const YAML::Node n = get(name);
        return (n && !n.IsNull()) ? to_number(n, key(name)) : fallback;
    }

    double required_number(const std::string& name) {
        const YAML::Node n = get(name);
        if (!n || n.IsNull()) {
            throw ConfigError("required key is missing", key(name));
        }
        return to_number(n, key(name));
    }

    std::optional<double> optional_number(const std::string& name, std::optional<double> fallback) {
        const YAML::Node n = get(name);
        if (!n) {
            return fallback;
        }
        if (n.IsNull()) {
            return std::nullopt;
        }
        return to_number(n, key(name));
    }

    int integer(const std::string& name, int fallback) {
        const double v = number(name, fallback);
        if (v != static_cast<int>(v)) {
            throw ConfigError("expected an integer", key(name));
        }
        return static_cast<int>(v);
    }

    bool boolean(const std::string& name, bool fallback) {
        const YAML::Node n = get(name);
        if (!n || n.IsNull()) {
            return fallback;
        }
        const std::string s = scalar(n, key(name));
        if (s == "true") {
            return true;
        }
        if (s == "false") {
            return false;
        }
        throw ConfigError("expected true or false, got '" + s + "'", key(name));
    }

    std::string text(const std::string& name, const std::string& fallback) {
        const YAML::Node n = get(name);
        return (n && !n.IsNull()) ? scalar(n, key(name)) : fallback;
    }

    std::vector<double> numbers(const std::string& name, std::vector<double> fallback) {
        const YAML::Node n = get(name);
        if (!n || n.IsNull()) {
            return fallback;
        }
        if (!n.IsSequence()) {
            throw ConfigError("expected a list of numbers", key(name));
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < n.size(); ++i) {
            out.push_back(to_number(n[i], key(name) + "[" + std::to_string(i) + "]"));
        }
        return out;
    }

    Section child(const std::string& name) { return Section(get(name), key(name)); }

    /// Throws on keys nobody asked for.
    void finish() const {
        if (!node_ || !node_.IsMap()) {
            return;
        }
        for (const auto& kv : node_) {
            const std::string k = kv.first.as<std::string>();
            if (!used_.count(k)) {
                throw ConfigError("unknown key", key(k));
            }
        }
    }

    static std::string scalar(const YAML::Node& n, const std::string& key) {
        if (!n.IsScalar()) {
            throw ConfigError("expected a scalar", key);
        }
        return n.Scalar();
    }

    static double to_number(const YAML::Node& n, const std::string& key) {
        const std::string s = scalar(n, key);
        double v = 0.0;
        const char* first = s.data();
        const char* last = s.data() + s.size();
        if (first != last && *first == '+') {
            ++first;
        }
        const auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc() || res.ptr != last) {
            throw ConfigError("expected a number, got '" + s + "'", key);
        }
        return v;
    }

private:
    YAML::Node node_;
    std::string path_;
    std::set<std::string> used_;
};

EfficiencyTable read_efficiency(Section& conv) {
    const bool has_csv = conv.present("efficiency_csv");
    const bool has_inline = conv.present("efficiency");
    if (has_csv && has_inline) {
        throw ConfigError("give either efficiency or efficiency_csv, not both",
                          conv.key("efficiency_csv"));
    }
    if (has_csv) {
        return EfficiencyTable::from_csv_file(conv.text("efficiency_csv", ""));
    }
    if (!has_inline) {
        return EfficiencyTable{};
    }
    const YAML::Node list = conv.get("efficiency");
    const std::string key = conv.key("efficiency");
    if (!list.IsSequence()) {
        throw ConfigError("expected a list of [v_in_v, i_in_a, eta] triples", key);
    }
    std::vector<EfficiencyPoint> pts;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string k = key + "[" + std::to_string(i) + "]";
        if (!list[i].IsSequence() || list[i].size() != 3) {
            throw ConfigError("expected [v_in_v, i_in_a, eta]", k);
        }
        pts.push_back({Section::to_number(list[i][0], k), Section::to_number(list[i][1], k),
                       Section::to_number(list[i][2], k)});
    }
    return EfficiencyTable(std::move(pts));
}

YAML::Node num(double v) { return YAML::Node(format_number(v)); }

YAML::Node num_list(const std::vector<double>& v) {
    YAML::Node n(YAML::NodeType::Sequence);
    for (double x : v) {
        n.push_back(format_number(x));
    }
    n.SetStyle(YAML::EmitterStyle::Flow);
    return n;
}

}  // namespace

AppConfig config_from_yaml(const YAML::Node& root) {
    AppConfig cfg;
    Section top(root, "");
    SimConfig& sim = cfg.sim;

    {
        Section s = top.child("profile");
        sim.profile.frequency_hz = s.required_number("frequency_hz");
        sim.profile.amplitude_mvpp = s.required_number("amplitude_mvpp");
        sim.profile.duration_s = s.number("duration_s", sim.profile.duration_s);
        sim.profile.force_gain = s.number("force_gain", sim.profile.force_gain);
        s.finish();
    }
    {
        Section s = top.child("model");
        PiezoModel& m = sim.model;
        m.f0_hz = s.number("f0_hz", m.f0_hz);
        m.q_factor = s.number("q_factor", m.q_factor);
        m.mass_kg = s.number("mass_kg", m.mass_kg);
        m.coupling_n_per_v = s.number("coupling_n_per_v", m.coupling_n_per_v);
        m.cp_farad = s.number("cp_farad", m.cp_farad);
        m.rp_ohm = s.number("rp_ohm", m.rp_ohm);
        s.finish();
    }
    {
        Section s = top.child("topology");
        const TopologyKind kind = topology_kind_from(s.text("kind", "ConverterBased"));
        RectifierParams rect;
        {
            Section r = s.child("rectifier");
            rect.vd_v = r.number("vd_v", rect.vd_v);
            r.finish();
        }
        ConverterParams conv;
        {
            Section c = s.child("converter");
            conv.v_threshold_v = c.number("v_threshold_v", conv.v_threshold_v);
            conv.quiescent_w = c.number("quiescent_w", conv.quiescent_w);
            conv.quiescent_scales_with_vcap =
                c.boolean("quiescent_scales_with_vcap", conv.quiescent_scales_with_vcap);
            conv.mpp_sample_interval_s = c.number("mpp_sample_interval_s", conv.mpp_sample_interval_s);
            conv.mpp_sample_duration_s = c.number("mpp_sample_duration_s", conv.mpp_sample_duration_s);
            conv.efficiency = read_efficiency(c);
            c.finish();
        }
        sim.topology = kind == TopologyKind::ConverterLess ? Topology::converter_less(rect)
                                                           : Topology::converter_based(conv, rect);
        s.finish();
    }
    {
        Section s = top.child("cap_load");
        CapLoadState& c = sim.cap_load;
        c.c_farad = s.number("c_farad", c.c_farad);
        c.v_cap_v = s.number("v_cap_v", c.v_cap_v);
        c.v_on_v = s.number("v_on_v", c.v_on_v);
        c.v_off_v = s.number("v_off_v", c.v_off_v);
        c.p_load_w = s.number("p_load_w", c.p_load_w);
        s.finish();
    }
    {
        Section s = top.child("tracker");
        TrackerPolicy& t = sim.tracker;
        t.kind = tracker_kind_from(s.text("kind", to_string(t.kind)));
        t.k_fraction = s.number("k_fraction", t.k_fraction);
        t.f_t_hz = s.optional_number("f_t_hz", t.f_t_hz);
        t.sweep_grid_v = s.numbers("sweep_grid_v", t.sweep_grid_v);
        s.finish();
    }
    {
        Section s = top.child("sim");
        sim.dt_s = s.number("dt_s", sim.dt_s);
        sim.transient_skip_s = s.optional_number("transient_skip_s", sim.transient_skip_s);
        sim.trace_rate_hz = s.number("trace_rate_hz", sim.trace_rate_hz);
        const double seed = s.number("seed", 0.0);
        if (!(seed >= 0.0) || seed != static_cast<double>(static_cast<std::uint64_t>(seed))) {
            throw ConfigError("expected a non-negative integer", "sim.seed");
        }
        sim.seed = static_cast<std::uint64_t>(seed);
        s.finish();
    }
    {
        Section s = top.child("grid");
        cfg.grid.frequencies_hz = s.numbers("frequencies_hz", cfg.grid.frequencies_hz);
        cfg.grid.amplitudes_mvpp = s.numbers("amplitudes_mvpp", cfg.grid.amplitudes_mvpp);
        const YAML::Node topo = s.get("topologies");
        if (topo && !topo.IsNull()) {
            if (!topo.IsSequence()) {
                throw ConfigError("expected a list", "grid.topologies");
            }
            cfg.grid.topologies.clear();
            for (const auto& n : topo) {
                cfg.grid.topologies.push_back(
                    topology_kind_from(Section::scalar(n, "grid.topologies")));
            }
        }
        s.finish();
    }
    cfg.grid.thresholds_v = sim.tracker.sweep_grid_v;
    {
        Section s = top.child("iv");
        cfg.iv.v_max_v = s.number("v_max_v", cfg.iv.v_max_v);
        cfg.iv.points = s.integer("points", cfg.iv.points);
        cfg.iv.settle_cycles = s.integer("settle_cycles", cfg.iv.settle_cycles);
        cfg.iv.average_cycles = s.integer("average_cycles", cfg.iv.average_cycles);
        if (!(cfg.iv.v_max_v > 0.0)) {
            throw ConfigError("must be > 0", "iv.v_max_v");
        }
        if (cfg.iv.points < 1) {
            throw ConfigError("must be >= 1", "iv.points");
        }
        s.finish();
    }
    {
        Section s = top.child("mppt");
        cfg.mppt.f_t_grid_hz = s.numbers("f_t_grid_hz", cfg.mppt.f_t_grid_hz);
        cfg.mppt.start_settled = s.boolean("start_settled", cfg.mppt.start_settled);
        s.finish();
    }
    (void)top.get("run");
    top.finish();

    sim.validate();
    return cfg;
}

void apply_override(YAML::Node& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override must look like key.path=value, got '" + assignment + "'");
    }
    const std::string path = assignment.substr(0, eq);
    YAML::Node value;
    try {
        value = YAML::Load(assignment.substr(eq + 1));
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("unparseable value: ") + e.what(), path);
    }
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string p; std::getline(ss, p, '.');) {
        if (p.empty()) {
            throw ConfigError("empty path segment", path);
        }
        parts.push_back(p);
    }
    if (!root || root.IsNull()) {
        root = YAML::Node(YAML::NodeType::Map);
    }
    YAML::Node cur = root;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        YAML::Node next = cur[parts[i]];
        if (!next || next.IsNull()) {
            cur[parts[i]] = YAML::Node(YAML::NodeType::Map);
            next = cur[parts[i]];
        } else if (!next.IsMap()) {
            throw ConfigError("cannot descend into a non-mapping", path);
        }
        cur.reset(next);
    }
    cur[parts.back()] = value;
}

AppConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw ConfigError("cannot open config file '" + path + "'");
    } catch (const YAML::Exception& e) {
        throw ConfigError("'" + path + "': " + e.what());
    }
    for (const auto& o : overrides) {
        apply_override(root, o);
    }
    return config_from_yaml(root);
}

YAML::Node to_yaml(const AppConfig& cfg) {
    const SimConfig& sim = cfg.sim;
    YAML::Node root(YAML::NodeType::Map);

    YAML::Node profile;
    profile["amplitude_mvpp"] = num(sim.profile.amplitude_mvpp);
    profile["frequency_hz"] = num(sim.profile.frequency_hz);
    profile["duration_s"] = num(sim.profile.duration_s);
    profile["force_gain"] = num(sim.profile.force_gain);
    root["profile"] = profile;

    YAML::Node model;
    model["f0_hz"] = num(sim.model.f0_hz);
    model["q_factor"] = num(sim.model.q_factor);
    model["mass_kg"] = num(sim.model.mass_kg);
    model["coupling_n_per_v"] = num(sim.model.coupling_n_per_v);
    model["cp_farad"] = num(sim.model.cp_farad);
    model["rp_ohm"] = num(sim.model.rp_ohm);
    root["model"] = model;

    YAML::Node topo;
    topo["kind"] = to_string(sim.topology.kind);
    topo["rectifier"]["vd_v"] = num(sim.topology.rectifier.vd_v);
    if (sim.topology.converter) {
        const ConverterParams& c = *sim.topology.converter;
        YAML::Node conv;
        conv["v_threshold_v"] = num(c.v_threshold_v);
        conv["quiescent_w"] = num(c.quiescent_w);
        conv["quiescent_scales_with_vcap"] = c.quiescent_scales_with_vcap ? "true" : "false";
        conv["mpp_sample_interval_s"] = num(c.mpp_sample_interval_s);
        conv["mpp_sample_duration_s"] = num(c.mpp_sample_duration_s);
        YAML::Node eff(YAML::NodeType::Sequence);
        for (const auto& p : c.efficiency.points()) {
            eff.push_back(num_list({p.v_in_v, p.i_in_a, p.eta}));
        }
        conv["efficiency"] = eff;
        topo["converter"] = conv;
    }
    root["topology"] = topo;

    YAML::Node cap;
    cap["c_farad"] = num(sim.cap_load.c_farad);
    cap["v_cap_v"] = num(sim.cap_load.v_cap_v);
    cap["v_on_v"] = num(sim.cap_load.v_on_v);
    cap["v_off_v"] = num(sim.cap_load.v_off_v);
    cap["p_load_w"] = num(sim.cap_load.p_load_w);
    root["cap_load"] = cap;

    YAML::Node tracker;
    tracker["kind"] = to_string(sim.tracker.kind);
    tracker["k_fraction"] = num(sim.tracker.k_fraction);
    tracker["f_t_hz"] = sim.tracker.f_t_hz ? num(*sim.tracker.f_t_hz) : YAML::Node(YAML::NodeType::Null);
    tracker["sweep_grid_v"] = num_list(sim.tracker.sweep_grid_v);
    root["tracker"] = tracker;

    YAML::Node s;
    s["dt_s"] = num(sim.dt_s);
    s["transient_skip_s"] =
        sim.transient_skip_s ? num(*sim.transient_skip_s) : YAML::Node(YAML::NodeType::Null);
    s["trace_rate_hz"] = num(sim.trace_rate_hz);
    s["seed"] = std::to_string(sim.seed);
    root["sim"] = s;

    YAML::Node grid;
    grid["frequencies_hz"] = num_list(cfg.grid.frequencies_hz);
    grid["amplitudes_mvpp"] = num_list(cfg.grid.amplitudes_mvpp);
    YAML::Node kinds(YAML::NodeType::Sequence);
    for (TopologyKind k : cfg.grid.topologies) {
        kinds.push_back(to_string(k));
    }
    kinds.SetStyle(YAML::EmitterStyle::Flow);
    grid["topologies"] = kinds;
    root["grid"] = grid;

    YAML::Node iv;
    iv["v_max_v"] = num(cfg.iv.v_max_v);
    iv["points"] = cfg.iv.points;
    iv["settle_cycles"] = cfg.iv.settle_cycles;
    iv["average_cycles"] = cfg.iv.average_cycles;
    root["iv"] = iv;

    YAML::Node mppt;
    mppt["f_t_grid_hz"] = num_list(cfg.mppt.f_t_grid_hz);
    mppt["start_settled"] = cfg.mppt.start_settled ? "true" : "false";
    root["mppt"] = mppt;
    return root;
}

YAML::Node default_document() { return to_yaml(AppConfig{}); }

std::string emit(const YAML::Node& node) {
    YAML::Emitter out;
    out << node;
    return std::string(out.c_str()) + "\n";
}

}  // namespace kehsim
