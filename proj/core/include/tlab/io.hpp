#pragma once

#include <string>
#include <vector>

#include "tlab/attack.hpp"
#include "tlab/detect.hpp"
#include "tlab/plant.hpp"
#include "tlab/sim.hpp"
#include "tlab/synthesis.hpp"
#include "tlab/sysid.hpp"
#include "tlab/types.hpp"

/**
 * Artifact I/O. Every JSON artifact carries {"schema_version": 1, "kind": ...}
 * and loaders reject mismatches with SchemaError. Unreadable or unwritable
 * paths raise IoError. CSV files use fixed headers and locale-independent
 * formatting, so byte-identical inputs produce byte-identical files.
 */
namespace tlab::io {

inline constexpr int kSchemaVersion = 1;

// ----- plant parameters ------------------------------------------------------
void save_plant_params(const std::string& path, const plant::PlantParams& p);
plant::PlantParams load_plant_params(const std::string& path);

// ----- identification records ------------------------------------------------
/// CSV with header "t,Q1,Q2,TS1,TS2" plus a JSON sidecar holding T_amb.
void save_experiment(const std::string& csv_path, const std::string& sidecar_path,
                     const sysid::ExperimentRecord& rec);
/// Load a record; with an empty sidecar path, T_amb defaults to the mean of
/// the two sensors' first samples.
sysid::ExperimentRecord load_experiment(const std::string& csv_path,
                                        const std::string& sidecar_path);

// ----- controller design artifact ---------------------------------------------
struct DesignArtifact {
  synthesis::ControllerRealization ctrl;
  plant::DiscreteModel model;
  plant::SteadyState ss;
  synthesis::Weights weights;
};
void save_design(const std::string& path, const DesignArtifact& d);
DesignArtifact load_design(const std::string& path);

// ----- detector artifact ---------------------------------------------------------
void save_detector(const std::string& path, const detect::DetectorConfig& cfg,
                   double arl_estimate = 0.0, int tune_iterations = 0);
detect::DetectorConfig load_detector(const std::string& path);

// ----- scenario -------------------------------------------------------------------
sim::ScenarioConfig load_scenario(const std::string& path);
void save_scenario(const std::string& path, const sim::ScenarioConfig& cfg);

// ----- run outputs -------------------------------------------------------------------
/// Header: k,TH1,TH2,TS1,TS2,y1,y2,yt1,yt2,u1raw,u2raw,u1,u2,r1,r2,yD,alarm,stage,ec,eD,er
void save_trace_csv(const std::string& path, const std::vector<sim::TraceRecord>& trace);
std::vector<sim::TraceRecord> load_trace_csv(const std::string& path);

/// Header: k,y_D,alarm
void save_alarm_csv(const std::string& path, const std::vector<sim::TraceRecord>& trace);

/// Header: k,a1,a2 with the stage-relative step index.
void save_attack_csv(const std::string& path, const std::vector<Vec2>& a);

void save_metrics(const std::string& path, const sim::Metrics& m);
sim::Metrics load_metrics(const std::string& path);

/// Worst-case plan summary: impact, target, solver bookkeeping, per-step margins.
void save_impact(const std::string& path, const attack::ImpactSolution& sol);
attack::ImpactSolution load_impact(const std::string& path);

// ----- residual statistics ---------------------------------------------------------------
void save_residual_stats(const std::string& path, const synthesis::ResidualStats& s);
synthesis::ResidualStats load_residual_stats(const std::string& path);

}  // namespace tlab::io
