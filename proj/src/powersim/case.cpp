#include "tsa/powersim/case.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tsa/error.hpp"

namespace tsa::powersim {

using nlohmann::json;

std::size_t PowerCase::bus_index(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return i;
  throw DataError("unknown bus id " + std::to_string(id));
}

double PowerCase::omega_s() const { return 2.0 * std::numbers::pi * f0; }

void PowerCase::validate() const {
  if (buses.empty()) throw DataError("case has no buses");
  if (!(f0 > 0.0)) throw DataError("f0 must be positive");
  if (!(base_mva > 0.0)) throw DataError("base_mva must be positive");
  std::set<int> ids;
  int slack = 0;
  for (const auto& b : buses) {
    if (!ids.insert(b.id).second) throw DataError("duplicate bus id " + std::to_string(b.id));
    if (b.type == BusType::slack) ++slack;
    if (!(b.vm > 0.0)) throw DataError("bus " + std::to_string(b.id) + " has non-positive vm");
  }
  if (slack != 1) throw DataError("case needs exactly one slack bus");
  for (const auto& br : branches) {
    bus_index(br.from);
    bus_index(br.to);
    if (br.from == br.to) throw DataError("branch connects bus " + std::to_string(br.from) + " to itself");
    if (br.r == 0.0 && br.x == 0.0) throw DataError("branch with zero impedance");
    if (!(br.tap > 0.0)) throw DataError("branch tap must be positive");
  }
  for (const auto& l : loads) bus_index(l.bus);
  if (generators.size() < 2) throw DataError("case needs at least 2 generators");
  std::set<int> gen_buses;
  for (const auto& g : generators) {
    const auto& bus = buses[bus_index(g.bus)];
    if (!gen_buses.insert(g.bus).second)
      throw DataError("more than one generator on bus " + std::to_string(g.bus));
    if (bus.type == BusType::pq)
      throw DataError("generator on bus " + std::to_string(g.bus) + " which is typed pq");
    if (!(g.h > 0.0)) throw DataError("generator inertia H must be positive");
    if (!(g.xd_prime > 0.0)) throw DataError("generator x'd must be positive");
  }
  for (const auto& b : buses)
    if (b.type != BusType::pq && !gen_buses.count(b.id))
      throw DataError("pv/slack bus " + std::to_string(b.id) + " has no generator");
}

namespace {

BusType parse_type(const std::string& s) {
  if (s == "pq" || s == "PQ") return BusType::pq;
  if (s == "pv" || s == "PV") return BusType::pv;
  if (s == "slack" || s == "ref" || s == "swing") return BusType::slack;
  throw DataError("unknown bus type '" + s + "'");
}

const char* type_name(BusType t) {
  switch (t) {
    case BusType::pq: return "pq";
    case BusType::pv: return "pv";
    case BusType::slack: return "slack";
  }
  return "pq";
}

}  // namespace

PowerCase parse_case(const std::string& json_text) {
  PowerCase c;
  try {
    const json j = json::parse(json_text);
    c.name = j.value("name", std::string{});
    c.f0 = j.value("f0", 60.0);
    c.base_mva = j.value("base_mva", 100.0);
    for (const auto& b : j.at("buses"))
      c.buses.push_back({b.at("id").get<int>(), parse_type(b.at("type").get<std::string>()),
                         b.value("vm", 1.0), b.value("va", 0.0)});
    for (const auto& br : j.at("branches"))
      c.branches.push_back({br.at("from").get<int>(), br.at("to").get<int>(), br.value("r", 0.0),
                            br.at("x").get<double>(), br.value("b", 0.0), br.value("tap", 1.0)});
    for (const auto& l : j.value("loads", json::array()))
      c.loads.push_back({l.at("bus").get<int>(), l.at("p").get<double>(), l.value("q", 0.0)});
    for (const auto& g : j.at("generators"))
      c.generators.push_back({g.at("bus").get<int>(), g.at("h").get<double>(),
                              g.at("xd_prime").get<double>(), g.value("pg", 0.0)});
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed case file: ") + e.what());
  }
  c.validate();
  return c;
}

PowerCase load_case(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open case file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

std::string case_to_json(const PowerCase& c) {
  json j;
  j["name"] = c.name;
  j["f0"] = c.f0;
  j["base_mva"] = c.base_mva;
  j["buses"] = json::array();
  for (const auto& b : c.buses)
    j["buses"].push_back({{"id", b.id}, {"type", type_name(b.type)}, {"vm", b.vm}, {"va", b.va}});
  j["branches"] = json::array();
  for (const auto& br : c.branches)
    j["branches"].push_back({{"from", br.from}, {"to", br.to}, {"r", br.r}, {"x", br.x},
                             {"b", br.b}, {"tap", br.tap}});
  j["loads"] = json::array();
  for (const auto& l : c.loads) j["loads"].push_back({{"bus", l.bus}, {"p", l.p}, {"q", l.q}});
  j["generators"] = json::array();
  for (const auto& g : c.generators)
    j["generators"].push_back({{"bus", g.bus}, {"h", g.h}, {"xd_prime", g.xd_prime}, {"pg", g.pg}});
  return j.dump(2) + "\n";
}

PowerCase wscc9() {
  PowerCase c;
  c.name = "WSCC 3-machine 9-bus";
  c.f0 = 60.0;
  c.base_mva = 100.0;
  c.buses = {{1, BusType::slack, 1.04, 0.0}, {2, BusType::pv, 1.025, 0.0},
             {3, BusType::pv, 1.025, 0.0},   {4, BusType::pq, 1.0, 0.0},
             {5, BusType::pq, 1.0, 0.0},     {6, BusType::pq, 1.0, 0.0},
             {7, BusType::pq, 1.0, 0.0},     {8, BusType::pq, 1.0, 0.0},
             {9, BusType::pq, 1.0, 0.0}};
  c.branches = {{1, 4, 0.0, 0.0576, 0.0, 1.0},     {2, 7, 0.0, 0.0625, 0.0, 1.0},
                {3, 9, 0.0, 0.0586, 0.0, 1.0},     {4, 5, 0.010, 0.085, 0.176, 1.0},
                {4, 6, 0.017, 0.092, 0.158, 1.0},  {5, 7, 0.032, 0.161, 0.306, 1.0},
                {6, 9, 0.039, 0.170, 0.358, 1.0},  {7, 8, 0.0085, 0.072, 0.149, 1.0},
                {8, 9, 0.0119, 0.1008, 0.209, 1.0}};
  c.loads = {{5, 1.25, 0.50}, {6, 0.90, 0.30}, {8, 1.00, 0.35}};
  c.generators = {{1, 23.64, 0.0608, 0.716}, {2, 6.40, 0.1198, 1.63}, {3, 3.01, 0.1813, 0.85}};
  return c;
}

}  // namespace tsa::powersim
