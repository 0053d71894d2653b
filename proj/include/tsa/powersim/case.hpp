#pragma once

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

namespace tsa::powersim {

enum class BusType { pq, pv, slack };

struct Bus {
  int id = 0;
  BusType type = BusType::pq;
  double vm = 1.0;  // p.u.; setpoint for pv/slack, solution after a power flow
  double va = 0.0;  // rad
};

/// Pi-model line or transformer; tap is the off-nominal ratio at the from side.
struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;  // total line charging
  double tap = 1.0;
};

/// Constant power at the operating point, converted to constant admittance
/// for dynamics.
struct Load {
  int bus = 0;
  double p = 0.0;
  double q = 0.0;
};

/// Classical machine: constant EMF behind transient reactance.
struct Generator {
  int bus = 0;
  double h = 0.0;         // inertia constant, s on system base
  double xd_prime = 0.0;  // p.u.
  double pg = 0.0;        // scheduled active output, p.u. (slack: solved)
};

struct PowerCase {
  std::string name;
  double f0 = 60.0;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Load> loads;
  std::vector<Generator> generators;

  std::size_t bus_index(int id) const;
  double omega_s() const;
  void validate() const;
};

PowerCase parse_case(const std::string& json_text);
PowerCase load_case(const std::filesystem::path& path);
std::string case_to_json(const PowerCase& c);

/// WSCC 3-machine 9-bus system (100 MVA base, 60 Hz), standard data.
PowerCase wscc9();

}  // namespace tsa::powersim
