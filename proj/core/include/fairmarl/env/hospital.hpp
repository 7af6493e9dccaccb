#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "fairmarl/rng.hpp"
#include "fairmarl/trajectory.hpp"

namespace fairmarl {

enum class Priority { High = 0, Medium = 1, Low = 2 };
enum class Impairment { None = 0, Low = 1, High = 2 };
enum class Illness { Pediatric = 0, General, Cardio, Xray, Psychiatric, Emergency };
enum class Symptom {
  IsChild = 0,
  Fever,
  Cough,
  MinorPain,
  ChestPain,
  ShortnessOfBreath,
  HighBloodPressure,
  SuspectedFracture,
  Confusion,
  Unconsciousness
};
inline constexpr int kSymptomCount = 10;
inline constexpr int kWardCount = 6;
// Pediatrics, PromptCare, AcuteCare, Imaging, Psychiatry, Resuscitation.
std::string ward_name(int ward);

// Hospital layout indices. Wards occupy locations 2..7 (location = 2 + ward).
inline constexpr int kLocEntrance = 0;
inline constexpr int kLocTriage = 1;
inline constexpr int kLocHub = 8;
inline constexpr int kLocExit = 9;
inline constexpr int kLocationCount = 10;
inline int ward_location(int ward) { return 2 + ward; }

std::vector<Symptom> illness_symptoms(Illness illness);
// Relative treatment reward weight; 0 when the ward is not listed for the
// illness. Exactly one ward per illness has weight 1.
double ward_weight(Illness illness, int ward);
int primary_ward(Illness illness);

double priority_factor(Priority p);  // high 3, medium 2, low 1
double impairment_speed(Impairment imp);  // 75 / 60 / 45 units per minute

struct Patient {
  int id = -1;
  Priority priority = Priority::Low;
  Impairment impairment = Impairment::None;
  Illness illness = Illness::General;
  double speed = 75.0;
  double arrival_time = 0.0;

  enum class Stage {
    NotArrived,
    AtEntrance,
    MovingToTriage,
    AwaitingEscort,
    InTriage,
    MovingToWard,
    InQueue,
    InTreatment,
    Exited
  };
  Stage stage = Stage::NotArrived;
  int location = kLocEntrance;
  int target_ward = -1;   // where the patient is headed or queued
  int treated_ward = -1;  // set at treatment completion
  enum class Routing { Unrouted, Perfect, Backup, Incorrect };
  Routing routing = Routing::Unrouted;
  int triage_decision = -1;  // index into the router's decision log

  int pending_dest = -1;  // location the current or next movement leg targets

  double wait_minutes = 0.0;     // accumulated waiting (clerk, escort, queue)
  double wait_open_since = -1.0;  // start of the current waiting period, -1 if none
  double escort_wait = 0.0;       // request-to-pickup minutes, summed over legs
  double escort_travel = 0.0;     // escorted movement minutes, summed over legs
  double accumulated_reward = 0.0;
  bool reward_final = false;

  int z() const { return impairment == Impairment::None ? 0 : 1; }
  bool self_moving() const { return impairment == Impairment::None; }
};

struct HsConfig {
  int clerks = 30;
  int nurses = 60;
  int robots = 30;
  int triage_dispatchers = 30;
  int swing_doctors = 18;
  int ward_doctors_per_ward = 10;
  int wards = kWardCount;
  int patients_per_day = 300;
  double day_length_min = 720.0;

  double peak_start_min = 180.0;
  double peak_end_min = 360.0;
  double peak_rate_factor = 3.0;

  double clerk_service_min = 2.0;
  double triage_service_min = 2.0;
  double treatment_mean_min = 20.0;
  double treatment_max_min = 120.0;
  double decision_tick_min = 5.0;

  double nurse_speed = 90.0;
  double robot_speed = 100.0;

  double r_incorrect = -2.0;
  double routing_credit_scale = 10.0;
  double patient_completion_scale = 10.0;
  double patient_wait_coeff = 0.01;
  double nurse_skill = 1.0;
  double robot_skill = 0.7;
  double escort_proximity_scale = 100.0;
  double escort_wait_coeff = 0.05;
  double escort_pending_coeff = 0.01;
  double doctor_completion_coeff = 0.1;
  double doctor_queue_coeff = 0.01;
  double doctor_move_coeff = 0.005;

  // Symmetric location-to-location distances; defaults route through the
  // corridor hub with two wards a floor away.
  std::array<std::array<double, kLocationCount>, kLocationCount> distances;

  HsConfig();
  void validate() const;
};

std::array<std::array<double, kLocationCount>, kLocationCount> default_hs_distances();

enum class HsAgent { Triage = 0, Escort = 1, Doctor = 2 };
inline constexpr int kHsAgentCount = 3;
std::string to_string(HsAgent agent);

inline constexpr int kTriageActionCount = kWardCount;  // choose a ward
// Escort actions: priority class x staff kind, then noop.
inline constexpr int kEscortActionCount = 7;
// Doctor actions: noop, or send one idle swing doctor to ward (action-1).
inline constexpr int kDoctorActionCount = 7;

struct HsEvent {
  enum class Kind {
    Arrival,
    TriageDecision,
    EscortRequest,  // payload a = patient id, or -1 for a re-inspection tick
    EscortAssigned,
    MoveComplete,
    TreatmentStart,
    TreatmentComplete,
    DoctorRebalance,
    Exit
  };
  double time = 0.0;
  long seq = 0;  // insertion order breaks time ties
  Kind kind = Kind::Arrival;
  int a = -1;
  int b = -1;
};

struct HsStaff {
  int id = -1;
  bool robot = false;
  int location = kLocHub;
  bool busy = false;
};

struct HsSwingDoctor {
  int id = -1;
  int ward = 0;
  double available_at = 0.0;  // arrival time at the current ward
};

struct HsWard {
  std::vector<int> queue;  // patient ids in enqueue order
  int busy_doctors = 0;
};

struct HsEscortRequest {
  int id = -1;
  int patient = -1;
  int from = 0;
  int to = 0;
  double request_time = 0.0;
  bool assigned = false;
  bool completed = false;
  int staff = -1;
};

struct HsDecision {
  HsAgent agent = HsAgent::Triage;
  int index = -1;  // per-agent decision sequence number
  int patient = -1;
  Eigen::VectorXd observation;
  int action_count = 0;
};

struct HsState {
  HsConfig cfg;
  Rng day_rng{0};
  double now = 0.0;
  double last_event_time = 0.0;
  bool finished = false;
  long event_seq = 0;

  std::vector<Patient> patients;
  std::vector<HsStaff> staff;
  std::vector<HsSwingDoctor> swing;
  std::array<HsWard, kWardCount> wards;
  std::vector<HsEscortRequest> escorts;
  std::vector<double> clerk_free;
  std::vector<double> triage_free;

  struct EventOrder {
    bool operator()(const HsEvent& x, const HsEvent& y) const {
      if (x.time != y.time) return x.time > y.time;
      return x.seq > y.seq;
    }
  };
  std::priority_queue<HsEvent, std::vector<HsEvent>, EventOrder> events;

  std::optional<HsDecision> pending;
  std::array<std::vector<double>, kHsAgentCount> decision_rewards;
  std::array<std::vector<int>, kHsAgentCount> decision_patient;
  double doctor_pending_reward = 0.0;

  int treated = 0;
  int swing_moves = 0;
  int routed_perfect = 0, routed_backup = 0, routed_incorrect = 0;
  double escort_wait_sum = 0.0;
  double escort_travel_sum = 0.0;
  int escort_legs = 0;
};

HsState hs_reset(const HsConfig& cfg, std::uint64_t seed);

// Runs the event queue forward. Returns the next decision a learning agent
// must make, or nothing once the day is finished. Calling it while a decision
// is outstanding is a sequencing error.
std::optional<HsDecision> hs_advance(HsState& s);

// Supplies the action for the decision hs_advance returned. Rejects stale or
// duplicate requests.
void hs_apply(HsState& s, const HsDecision& decision, int action);

// Low-level operations behind the action adapters. Both return the immediate
// reward of the operation; deferred credits land in the decision log later.
int triage_observation_dim();
Eigen::VectorXd triage_observe(const HsState& s, int patient_id);
double triage_apply(HsState& s, int patient_id, int ward_choice);

int escort_observation_dim();
Eigen::VectorXd escort_observe(const HsState& s);
double escort_apply(HsState& s, int request_id, int staff_id);

int doctor_observation_dim();
Eigen::VectorXd doctor_observe(const HsState& s);
Eigen::Vector3d doctor_ward_features(const HsState& s, int ward);
// Target swing-doctor counts per ward; returns how many relocations it took.
int doctor_apply(HsState& s, const std::array<int, kWardCount>& allocation);

// Patient attribute sampling (exposed for distribution tests).
Patient sample_patient(Rng& rng);
std::vector<double> sample_arrival_times(Rng& rng, const HsConfig& cfg);

// Paired days sharing every random draw, with each patient's impairment
// flipped none<->high (low unchanged) in the second state.
std::pair<HsState, HsState> hs_counterfactual_pair(const HsConfig& cfg, std::uint64_t seed);

struct HsMetrics {
  int arrivals = 0;
  int treated = 0;
  double mean_escort_wait = 0.0;
  double mean_escort_travel = 0.0;
  int swing_moves = 0;
  std::optional<double> pct_perfect, pct_backup, pct_incorrect;
  double mean_patient_reward = 0.0;
};
HsMetrics episode_metrics(const HsState& s);

// Per-patient accumulated rewards and group labels (z from impairment,
// lf from priority) for the fairness metrics.
std::map<AgentId, double> hs_patient_returns(const HsState& s);
std::vector<AgentProfile> hs_patient_profiles(const HsState& s);

// Empty when the state is structurally consistent.
std::string hs_invariant_violation(const HsState& s);

}  // namespace fairmarl
