#include "powertalk/config.hpp"

#include "powertalk/error.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>

namespace powertalk {

using nlohmann::json;

namespace {

void only_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) known = known || it.key() == key;
        if (!known) throw Error(ErrorKind::SchemaError, where + ": unknown field '" + it.key() + "'");
    }
}

const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw Error(ErrorKind::SchemaError, where + ": missing required field '" + key + "'");
    return *it;
}

double number(const json& value, const std::string& where) {
    if (!value.is_number()) throw Error(ErrorKind::SchemaError, where + ": expected a number");
    return value.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
    auto it = obj.find(key);
    return it == obj.end() ? fallback : number(*it, where + "." + key);
}

std::uint64_t count(const json& value, const std::string& where) {
    if (!value.is_number_unsigned()) throw Error(ErrorKind::SchemaError, where + ": expected a non-negative integer");
    return value.get<std::uint64_t>();
}

std::string bus_key(const json& value, const std::string& where) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_unsigned()) return std::to_string(value.get<std::uint64_t>());
    throw Error(ErrorKind::SchemaError, where + ": bus id must be a string or non-negative integer");
}

std::string position(std::string_view text, std::size_t byte) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

}  // namespace

GridDocument parse_config(std::string_view text) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, position(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
    }
    if (!root.is_object()) throw Error(ErrorKind::SchemaError, "document must be a JSON object");
    only_keys(root, {"buses", "lines", "sim"}, "document");

    GridDocument doc;
    const json& buses = require(root, "buses", "document");
    if (!buses.is_array() || buses.empty()) throw Error(ErrorKind::SchemaError, "buses: expected a non-empty array");

    std::map<std::string, std::size_t> index;
    for (std::size_t n = 0; n < buses.size(); ++n) {
        const std::string where = "buses[" + std::to_string(n) + "]";
        const json& b = buses[n];
        if (!b.is_object()) throw Error(ErrorKind::SchemaError, where + ": expected an object");
        only_keys(b, {"id", "load", "vsc"}, where);
        BusSpec bus;
        bus.name = bus_key(require(b, "id", where), where + ".id");
        if (!index.emplace(bus.name, n).second) throw Error(ErrorKind::SchemaError, where + ": duplicate bus id '" + bus.name + "'");
        if (auto it = b.find("load"); it != b.end()) {
            if (!it->is_object()) throw Error(ErrorKind::SchemaError, where + ".load: expected an object");
            only_keys(*it, {"r_cr", "i_cc", "d_cp"}, where + ".load");
            if (auto r = it->find("r_cr"); r != it->end() && !r->is_null()) bus.load.r_cr = number(*r, where + ".load.r_cr");
            bus.load.i_cc = number_or(*it, "i_cc", 0.0, where + ".load");
            bus.load.d_cp = number_or(*it, "d_cp", 0.0, where + ".load");
        }
        if (auto it = b.find("vsc"); it != b.end()) {
            if (!it->is_object()) throw Error(ErrorKind::SchemaError, where + ".vsc: expected an object");
            only_keys(*it, {"x_nom", "r_nom", "r_max", "pi"}, where + ".vsc");
            VscSpec vsc;
            vsc.x_nom = number(require(*it, "x_nom", where + ".vsc"), where + ".vsc.x_nom");
            vsc.r_nom = number(require(*it, "r_nom", where + ".vsc"), where + ".vsc.r_nom");
            if (auto r = it->find("r_max"); r != it->end()) vsc.r_max = number(*r, where + ".vsc.r_max");
            vsc.pi_budget = number_or(*it, "pi", 0.0, where + ".vsc");
            bus.vsc = vsc;
        }
        doc.grid.buses.push_back(std::move(bus));
    }

    const json& lines = require(root, "lines", "document");
    if (!lines.is_array()) throw Error(ErrorKind::SchemaError, "lines: expected an array");
    if (lines.empty() && doc.grid.buses.size() > 1) {
        throw Error(ErrorKind::SchemaError, "lines: a grid with several buses needs at least one line");
    }
    for (std::size_t l = 0; l < lines.size(); ++l) {
        const std::string where = "lines[" + std::to_string(l) + "]";
        const json& line = lines[l];
        if (!line.is_object()) throw Error(ErrorKind::SchemaError, where + ": expected an object");
        only_keys(line, {"a", "b", "r", "rho", "length_km"}, where);
        auto endpoint = [&](const char* key) {
            const std::string id = bus_key(require(line, key, where), where + "." + key);
            auto it = index.find(id);
            if (it == index.end()) throw Error(ErrorKind::SchemaError, where + ": unknown bus '" + id + "'");
            return BusId{it->second};
        };
        const BusId a = endpoint("a");
        const BusId b = endpoint("b");
        const bool direct = line.contains("r");
        const bool distance = line.contains("rho") || line.contains("length_km");
        if (direct == distance) throw Error(ErrorKind::SchemaError, where + ": give either 'r' or both 'rho' and 'length_km'");
        if (direct) {
            doc.grid.lines.push_back({a, b, number(line["r"], where + ".r")});
        } else {
            doc.grid.lines.push_back(LineSpec::from_length(a, b, number(require(line, "rho", where), where + ".rho"),
                                                           number(require(line, "length_km", where), where + ".length_km")));
        }
    }

    if (auto it = root.find("sim"); it != root.end()) {
        if (!it->is_object()) throw Error(ErrorKind::SchemaError, "sim: expected an object");
        only_keys(*it, {"sigma_z", "seed", "slots"}, "sim");
        doc.sim.sigma_z = number_or(*it, "sigma_z", doc.sim.sigma_z, "sim");
        if (auto s = it->find("seed"); s != it->end()) doc.sim.seed = count(*s, "sim.seed");
        if (auto s = it->find("slots"); s != it->end()) doc.sim.slots = count(*s, "sim.slots");
    }
    return doc;
}

GridDocument load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string serialize_config(const GridDocument& doc) {
    json root;
    root["buses"] = json::array();
    auto name_of = [&](BusId id) {
        const std::string& name = doc.grid.buses.at(id.index).name;
        return name.empty() ? std::to_string(id.index) : name;
    };
    for (std::size_t n = 0; n < doc.grid.buses.size(); ++n) {
        const BusSpec& bus = doc.grid.buses[n];
        json b;
        b["id"] = name_of(BusId{n});
        json load = json::object();
        if (bus.load.r_cr) load["r_cr"] = *bus.load.r_cr;
        load["i_cc"] = bus.load.i_cc;
        load["d_cp"] = bus.load.d_cp;
        b["load"] = load;
        if (bus.vsc) {
            json vsc;
            vsc["x_nom"] = bus.vsc->x_nom;
            vsc["r_nom"] = bus.vsc->r_nom;
            if (bus.vsc->r_max) vsc["r_max"] = *bus.vsc->r_max;
            vsc["pi"] = bus.vsc->pi_budget;
            b["vsc"] = vsc;
        }
        root["buses"].push_back(b);
    }
    root["lines"] = json::array();
    for (const LineSpec& line : doc.grid.lines) {
        root["lines"].push_back({{"a", name_of(line.a)}, {"b", name_of(line.b)}, {"r", line.r_line}});
    }
    root["sim"] = {{"sigma_z", doc.sim.sigma_z}, {"seed", doc.sim.seed}, {"slots", doc.sim.slots}};
    return root.dump(2) + "\n";
}

}  // namespace powertalk
