#pragma once

// Experiment configuration: a flat INI file with sections
//   [geometry] [kinetics] [source] [initial] [discretization] [table] [output] [run]
// documented in docs/config_schema.md. Unknown sections or keys are rejected.

#include "evohom/cell_transform.hpp"
#include "evohom/fields.hpp"
#include "evohom/kinetics.hpp"
#include "evohom/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace evohom {

struct DiscretizationConfig {
  int macro_n = 32;
  std::vector<double> epsilons{0.5, 0.25, 0.125}; // kept sorted by decreasing epsilon
  int n_boundary = 0;    // 0 derives it from target_h
  double target_h = 0.05; // micro reference mesh
  double dt = 1.0 / 200;
  double t_end = 0.5;
  double diffusion = 1.0;
  double cg_tol = 1e-12;
  bool source_at_mapped_point = true;
  bool pin_radii = false;

  std::size_t steps() const;
  MeshSettings micro_mesh() const;
};

struct TableConfig {
  double r_lo = 0.15;
  double r_hi = 0.35;
  int count = 11;
  double target_h = 0.03;
  int n_boundary = 0;
  std::string file; // load this table instead of computing it

  std::vector<double> radii() const;
  MeshSettings mesh() const;
};

struct OutputConfig {
  std::string dir = "out";
  int snapshot_every = 0; // 0 writes only the initial and final snapshots
};

struct ExperimentConfig {
  TransformParams geometry;
  KineticsSpec kinetics; // r_min and r_max always follow the geometry
  FieldSpec source{"zero", {}};
  FieldSpec u0{"constant", {{"value", 0.9}}};
  FieldSpec r0{"constant", {{"value", 0.2}}};
  DiscretizationConfig discretization;
  TableConfig table;
  OutputConfig output;
  std::uint64_t seed = 20240611;

  // Throws ConfigError naming the offending key or inequality.
  void validate() const;
  // Every effective value in INI form; parsing it back gives the same configuration.
  std::string canonical() const;
};

// Parses and validates. Throws ConfigError with the source name and key.
ExperimentConfig parse_config(std::istream& in, const std::string& source_name = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

std::string sha256_hex(std::string_view data);

} // namespace evohom
