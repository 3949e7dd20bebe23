#pragma once

#include <string>
#include <vector>

#include "gridpass/network.hpp"
#include "gridpass/pei.hpp"
#include "gridpass/scenario.hpp"

namespace gridpass {

// Switchable part of the system: which lines are closed, present load values,
// grid frequency and which interfaces are active, plus the frozen references.
struct NetworkConfig {
  std::vector<bool> line_closed;
  std::vector<LoadSpec> loads;
  double grid_omega = 0.0;
  std::vector<bool> pei_active;
  std::vector<PeiReferences> pei_refs;  // used in frozen mode
  double pei_blend = 1.0;  // continuation parameter for equilibrium solves
};

struct TerminalValues {
  Vec2 v_odq{0.0, 0.0};  // inverter terminal voltage, local frame
  Vec2 i_odq{0.0, 0.0};  // inverter terminal current (into the inverter), local frame
};

struct IbrOutputs {
  TerminalValues local;
  Vec2 v_node_DQ{0.0, 0.0};  // network-side node voltage
  Vec2 pq{0.0, 0.0};         // instantaneous p, q delivered by the inverter
  double omega = 0.0;
  double delta = 0.0;
  // interface channels (zero when inactive)
  Vec2 dv_cmd{0.0, 0.0};
  Vec2 di_cmd{0.0, 0.0};
  double P_v = 0.0;
  double P_c = 0.0;
};

struct SystemOutputs {
  std::vector<IbrOutputs> ibr;
};

struct OperatingPoint {
  Vec x;
  std::vector<double> omega;  // steady frequency of each inverter's island, rad/s
  std::vector<TerminalValues> terminals;
  double residual = 0.0;      // max scaled derivative in the co-rotating frames
  std::string dominant;       // subsystem with the largest residual
  int iterations = 0;
};

struct StateInfo {
  std::string name;
  double scale = 1.0;  // per-unit base for scaling
  enum class Frame { Local, CommonD, CommonQ, Angle } frame = Frame::Local;
  int island_node = 0;  // node whose island the quantity belongs to (0: none)
};

class MicrogridModel {
 public:
  explicit MicrogridModel(Scenario scenario);

  const Scenario& scenario() const { return sc_; }
  int size() const { return n_states_; }
  const std::vector<StateInfo>& state_info() const { return info_; }

  NetworkConfig initial_config() const;
  void apply_event(const Event& e, NetworkConfig& cfg, Vec& x) const;

  // Time derivative in the nominal rotating frame.
  void rhs(const Vec& x, const NetworkConfig& cfg, Vec& dx, SystemOutputs* out = nullptr) const;

  int ibr_offset(int n) const { return ibr_off_[n]; }
  int angle_index(int n) const;
  int tracker_offset(int n) const { return tracker_off_[n]; }  // -1 when absent
  int pll_offset(int n) const { return pll_off_[n]; }          // -1 when absent
  int line_offset(int k) const { return line_off_[k]; }
  int load_offset(int k) const { return load_off_[k]; }        // -1 when static
  int grid_offset() const { return grid_off_; }                // branch D, Q then angle
  double inverter_angle(const Vec& x, int n) const;
  double pei_angle(const Vec& x, int n) const;

  // Islands of the non-neutral nodes under the given line states; index per node-1.
  std::vector<int> islands(const NetworkConfig& cfg) const;
  NetworkTopology topology(const NetworkConfig& cfg, bool include_grid = true) const;
  bool has_constant_power_load() const;

  // Rotation generator used to move into co-rotating frames.
  void rotation_generator(const Vec& x, const std::vector<double>& domega_per_node, Vec& g) const;

 private:
  Scenario sc_;
  int n_states_ = 0;
  std::vector<StateInfo> info_;
  std::vector<int> ibr_off_, tracker_off_, pll_off_, line_off_, load_off_;
  int grid_off_ = -1;
  std::vector<int> node_ibr_;  // node-1 -> inverter index
};

struct OperatingPointOptions {
  bool include_pei = false;  // solve with the interfaces active (references from cfg)
  double tolerance = 1e-10;
  int max_iterations = 60;
};

OperatingPoint find_operating_point(const MicrogridModel& model, const NetworkConfig& cfg,
                                    const OperatingPointOptions& opts = {}, const Vec* guess = nullptr);
// Pre-event equilibrium of a scenario.
OperatingPoint find_operating_point(const Scenario& scenario);

// Scaled residual of the co-rotating steady-state conditions.
double steady_state_residual(const MicrogridModel& model, const NetworkConfig& cfg, const OperatingPoint& op,
                             bool include_pei, std::string* dominant = nullptr);

enum class SmallSignalScope { Fast, Full };

struct SmallSignalModel {
  Mat A;
  std::vector<std::string> labels;
  Eigen::VectorXcd eigenvalues;
  double max_real = 0.0;  // excluding the structural rotation mode
};

SmallSignalModel assemble_small_signal(const MicrogridModel& model, const NetworkConfig& cfg,
                                       const OperatingPoint& op, SmallSignalScope scope = SmallSignalScope::Fast,
                                       bool include_pei = false);

// Linearization after every scripted event has been applied, with interface
// references taken at the pre-event equilibrium (as the simulator does).
struct PostEventAnalysis {
  OperatingPoint pre;
  OperatingPoint post;
  NetworkConfig cfg;
  SmallSignalModel small_signal;
};
PostEventAnalysis analyze_post_event(const Scenario& scenario, bool include_pei,
                                     SmallSignalScope scope = SmallSignalScope::Full);

// Explicit block interconnection of linear devices and RL branches: every device
// sits on its own node, rotated into the common frame by its angle, with an
// optional interface (alpha, beta, kappa) between device and node.
struct DeviceBlock {
  StateSpaceModel model;
  double delta = 0.0;
  std::optional<PeiConfig> pei;
};

struct BranchBlock {
  Branch branch;      // rl-line or resistive, endpoints in node numbering
  double omega = 0.0; // frame rate used for the inductive coupling
};

Mat stack_interconnection(const std::vector<DeviceBlock>& devices, const std::vector<BranchBlock>& branches);

}  // namespace gridpass
