#include "fairmarl/env/hospital.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fairmarl {

namespace {

constexpr int kWardPediatrics = 0;
constexpr int kWardPromptCare = 1;
constexpr int kWardAcuteCare = 2;
constexpr int kWardImaging = 3;
constexpr int kWardPsychiatry = 4;
constexpr int kWardResuscitation = 5;

double dist(const HsState& s, int a, int b) {
  return s.cfg.distances[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
}

void push_event(HsState& s, double time, HsEvent::Kind kind, int a, int b) {
  HsEvent e;
  e.time = time;
  e.seq = s.event_seq++;
  e.kind = kind;
  e.a = a;
  e.b = b;
  s.events.push(e);
}

// Doctors physically present at the ward right now.
int ward_capacity(const HsState& s, int ward) {
  int cap = s.cfg.ward_doctors_per_ward;
  for (const auto& d : s.swing)
    if (d.ward == ward && d.available_at <= s.now) ++cap;
  return cap;
}

void close_wait(HsState& s, Patient& p) {
  if (p.wait_open_since >= 0.0) {
    p.wait_minutes += s.now - p.wait_open_since;
    p.wait_open_since = -1.0;
  }
}

// Claims the earliest-free server in a fixed pool; waiting time up to the
// service start (clamped to the day) is charged to the patient immediately.
double pool_begin(HsState& s, Patient& p, std::vector<double>& pool, double service) {
  auto slot = std::min_element(pool.begin(), pool.end());
  double start = std::max(s.now, *slot);
  double charged = std::min(start, s.cfg.day_length_min);
  if (charged > s.now) p.wait_minutes += charged - s.now;
  *slot = start + service;
  return start + service;
}

double queue_pressure(const HsState& s) {
  double total = 0.0;
  for (const auto& w : s.wards)
    for (int pid : w.queue) total += priority_factor(s.patients[static_cast<std::size_t>(pid)].priority);
  return total;
}

int unassigned_escorts(const HsState& s) {
  int n = 0;
  for (const auto& r : s.escorts)
    if (!r.assigned) ++n;
  return n;
}

bool any_idle_staff(const HsState& s) {
  for (const auto& st : s.staff)
    if (!st.busy) return true;
  return false;
}

void try_start_treatments(HsState& s, int ward) {
  auto& w = s.wards[static_cast<std::size_t>(ward)];
  while (!w.queue.empty() && w.busy_doctors < ward_capacity(s, ward)) {
    int pid = w.queue.front();
    w.queue.erase(w.queue.begin());
    Patient& p = s.patients[static_cast<std::size_t>(pid)];
    close_wait(s, p);
    p.stage = Patient::Stage::InTreatment;
    w.busy_doctors += 1;
    push_event(s, s.now, HsEvent::Kind::TreatmentStart, pid, ward);
  }
}

void relocate_swing(HsState& s, HsSwingDoctor& d, int ward) {
  int from = d.ward;
  d.ward = ward;
  d.available_at = s.now + dist(s, ward_location(from), ward_location(ward)) / s.cfg.nurse_speed;
  s.swing_moves += 1;
  push_event(s, d.available_at, HsEvent::Kind::TreatmentStart, -1, ward);
}

// How many swing doctors may leave this ward without stranding a treatment.
int movable_swing_bound(const HsState& s, int ward) {
  int arrived = 0;
  for (const auto& d : s.swing)
    if (d.ward == ward && d.available_at <= s.now) ++arrived;
  int idle = ward_capacity(s, ward) - s.wards[static_cast<std::size_t>(ward)].busy_doctors;
  return std::min(arrived, std::max(0, idle));
}

void maybe_escort_decision(HsState& s) {
  if (s.pending) return;
  if (unassigned_escorts(s) == 0 || !any_idle_staff(s)) return;
  HsDecision d;
  d.agent = HsAgent::Escort;
  d.index = static_cast<int>(s.decision_rewards[static_cast<int>(HsAgent::Escort)].size());
  d.patient = -1;
  d.observation = escort_observe(s);
  d.action_count = kEscortActionCount;
  s.pending = d;
}

void surface_triage_decision(HsState& s, int patient) {
  HsDecision d;
  d.agent = HsAgent::Triage;
  d.index = static_cast<int>(s.decision_rewards[static_cast<int>(HsAgent::Triage)].size());
  d.patient = patient;
  d.observation = triage_observe(s, patient);
  d.action_count = kTriageActionCount;
  s.pending = d;
}

void surface_doctor_decision(HsState& s) {
  HsDecision d;
  d.agent = HsAgent::Doctor;
  d.index = static_cast<int>(s.decision_rewards[static_cast<int>(HsAgent::Doctor)].size());
  d.patient = -1;
  d.observation = doctor_observe(s);
  d.action_count = kDoctorActionCount;
  s.pending = d;
}

void settle_doctor_record(HsState& s) {
  auto& log = s.decision_rewards[static_cast<int>(HsAgent::Doctor)];
  if (log.empty()) return;
  log.back() += s.doctor_pending_reward - s.cfg.doctor_queue_coeff * queue_pressure(s);
  s.doctor_pending_reward = 0.0;
}

void begin_leg(HsState& s, Patient& p, int from, int dest, double depart_time) {
  p.pending_dest = dest;
  if (p.self_moving()) {
    p.stage = dest == kLocTriage ? Patient::Stage::MovingToTriage : Patient::Stage::MovingToWard;
    push_event(s, depart_time + dist(s, from, dest) / p.speed, HsEvent::Kind::MoveComplete, p.id, -1);
  } else {
    push_event(s, depart_time, HsEvent::Kind::EscortRequest, p.id, -1);
  }
}

void handle_event(HsState& s, const HsEvent& ev) {
  using K = HsEvent::Kind;
  switch (ev.kind) {
    case K::Arrival: {
      Patient& p = s.patients[static_cast<std::size_t>(ev.a)];
      p.stage = Patient::Stage::AtEntrance;
      p.location = kLocEntrance;
      double done = pool_begin(s, p, s.clerk_free, s.cfg.clerk_service_min);
      begin_leg(s, p, kLocEntrance, kLocTriage, done);
      break;
    }
    case K::TriageDecision:
      surface_triage_decision(s, ev.a);
      break;
    case K::EscortRequest: {
      if (ev.a >= 0) {
        Patient& p = s.patients[static_cast<std::size_t>(ev.a)];
        HsEscortRequest r;
        r.id = static_cast<int>(s.escorts.size());
        r.patient = ev.a;
        r.from = p.location;
        r.to = p.pending_dest;
        r.request_time = s.now;
        s.escorts.push_back(r);
        p.stage = Patient::Stage::AwaitingEscort;
        p.wait_open_since = s.now;
      } else if (ev.b == 1) {
        push_event(s, s.now + s.cfg.decision_tick_min, K::EscortRequest, -1, 1);
      }
      maybe_escort_decision(s);
      break;
    }
    case K::EscortAssigned: {
      HsEscortRequest& r = s.escorts[static_cast<std::size_t>(ev.a)];
      HsStaff& st = s.staff[static_cast<std::size_t>(ev.b)];
      Patient& p = s.patients[static_cast<std::size_t>(r.patient)];
      st.location = p.location;
      double waited = s.now - r.request_time;
      p.wait_minutes += waited;
      p.wait_open_since = -1.0;
      p.escort_wait += waited;
      s.escort_wait_sum += waited;
      double pace = std::min(st.robot ? s.cfg.robot_speed : s.cfg.nurse_speed, p.speed);
      double dur = dist(s, r.from, r.to) / pace;
      p.escort_travel += dur;
      s.escort_travel_sum += dur;
      s.escort_legs += 1;
      p.stage = r.to == kLocTriage ? Patient::Stage::MovingToTriage : Patient::Stage::MovingToWard;
      push_event(s, s.now + dur, K::MoveComplete, p.id, ev.b);
      break;
    }
    case K::MoveComplete: {
      Patient& p = s.patients[static_cast<std::size_t>(ev.a)];
      if (ev.b >= 0) {
        HsStaff& st = s.staff[static_cast<std::size_t>(ev.b)];
        st.location = p.pending_dest;
        st.busy = false;
        for (auto& r : s.escorts)
          if (r.staff == ev.b && r.assigned && !r.completed) r.completed = true;
      }
      p.location = p.pending_dest;
      if (p.location == kLocTriage) {
        double done = pool_begin(s, p, s.triage_free, s.cfg.triage_service_min);
        p.stage = Patient::Stage::InTriage;
        push_event(s, done, K::TriageDecision, p.id, -1);
      } else {
        int w = p.location - 2;
        p.stage = Patient::Stage::InQueue;
        p.target_ward = w;
        s.wards[static_cast<std::size_t>(w)].queue.push_back(p.id);
        p.wait_open_since = s.now;
        try_start_treatments(s, w);
      }
      if (ev.b >= 0) push_event(s, s.now, K::EscortRequest, -1, -1);
      break;
    }
    case K::TreatmentStart: {
      if (ev.a < 0) {
        try_start_treatments(s, ev.b);
        break;
      }
      double dur = std::min(s.day_rng.exponential(s.cfg.treatment_mean_min), s.cfg.treatment_max_min);
      push_event(s, s.now + dur, K::TreatmentComplete, ev.a, ev.b);
      break;
    }
    case K::TreatmentComplete: {
      Patient& p = s.patients[static_cast<std::size_t>(ev.a)];
      s.wards[static_cast<std::size_t>(ev.b)].busy_doctors -= 1;
      s.treated += 1;
      p.treated_ward = ev.b;
      double weight = ward_weight(p.illness, ev.b);
      p.accumulated_reward = s.cfg.patient_completion_scale * weight -
                             s.cfg.patient_wait_coeff * priority_factor(p.priority) * p.wait_minutes;
      p.reward_final = true;
      if (p.routing != Patient::Routing::Incorrect && p.triage_decision >= 0)
        s.decision_rewards[static_cast<int>(HsAgent::Triage)][static_cast<std::size_t>(p.triage_decision)] +=
            s.cfg.routing_credit_scale * weight;
      s.doctor_pending_reward += s.cfg.doctor_completion_coeff;
      push_event(s, s.now, K::Exit, ev.a, -1);
      try_start_treatments(s, ev.b);
      break;
    }
    case K::DoctorRebalance:
      settle_doctor_record(s);
      push_event(s, s.now + s.cfg.decision_tick_min, K::DoctorRebalance, -1, -1);
      surface_doctor_decision(s);
      break;
    case K::Exit: {
      Patient& p = s.patients[static_cast<std::size_t>(ev.a)];
      p.stage = Patient::Stage::Exited;
      p.location = kLocExit;
      break;
    }
  }
}

void finalize_day(HsState& s) {
  if (s.finished) return;
  s.now = s.cfg.day_length_min;
  settle_doctor_record(s);
  for (auto& p : s.patients) {
    if (p.stage == Patient::Stage::NotArrived) {
      p.reward_final = true;
      continue;
    }
    close_wait(s, p);
    if (!p.reward_final) {
      p.accumulated_reward = -s.cfg.patient_wait_coeff * priority_factor(p.priority) * p.wait_minutes;
      p.reward_final = true;
    }
  }
  s.finished = true;
}

}  // namespace

std::string ward_name(int ward) {
  static const char* const names[kWardCount] = {"Pediatrics", "PromptCare",  "AcuteCare",
                                                "Imaging",    "Psychiatry", "Resuscitation"};
  if (ward < 0 || ward >= kWardCount) throw std::invalid_argument("ward_name: ward out of range");
  return names[ward];
}

std::vector<Symptom> illness_symptoms(Illness illness) {
  switch (illness) {
    case Illness::Pediatric:
      return {Symptom::IsChild, Symptom::Fever, Symptom::Cough};
    case Illness::General:
      return {Symptom::Fever, Symptom::MinorPain};
    case Illness::Cardio:
      return {Symptom::ChestPain, Symptom::ShortnessOfBreath, Symptom::HighBloodPressure};
    case Illness::Xray:
      return {Symptom::SuspectedFracture, Symptom::MinorPain};
    case Illness::Psychiatric:
      return {Symptom::Confusion, Symptom::HighBloodPressure};
    case Illness::Emergency:
      return {Symptom::Unconsciousness, Symptom::ChestPain, Symptom::ShortnessOfBreath};
  }
  throw std::invalid_argument("illness_symptoms: unknown illness");
}

double ward_weight(Illness illness, int ward) {
  if (ward < 0 || ward >= kWardCount) throw std::invalid_argument("ward_weight: ward out of range");
  switch (illness) {
    case Illness::Pediatric:
      if (ward == kWardPediatrics) return 1.0;
      if (ward == kWardPromptCare) return 0.6;
      return 0.0;
    case Illness::General:
      if (ward == kWardPromptCare) return 1.0;
      if (ward == kWardAcuteCare) return 0.5;
      return 0.0;
    case Illness::Cardio:
      if (ward == kWardAcuteCare) return 1.0;
      if (ward == kWardResuscitation) return 0.7;
      if (ward == kWardPromptCare) return 0.4;
      return 0.0;
    case Illness::Xray:
      if (ward == kWardImaging) return 1.0;
      if (ward == kWardPromptCare) return 0.5;
      return 0.0;
    case Illness::Psychiatric:
      if (ward == kWardPsychiatry) return 1.0;
      if (ward == kWardPromptCare) return 0.2;
      return 0.0;
    case Illness::Emergency:
      if (ward == kWardResuscitation) return 1.0;
      return 0.0;
  }
  throw std::invalid_argument("ward_weight: unknown illness");
}

int primary_ward(Illness illness) {
  switch (illness) {
    case Illness::Pediatric: return kWardPediatrics;
    case Illness::General: return kWardPromptCare;
    case Illness::Cardio: return kWardAcuteCare;
    case Illness::Xray: return kWardImaging;
    case Illness::Psychiatric: return kWardPsychiatry;
    case Illness::Emergency: return kWardResuscitation;
  }
  throw std::invalid_argument("primary_ward: unknown illness");
}

double priority_factor(Priority p) {
  switch (p) {
    case Priority::High: return 3.0;
    case Priority::Medium: return 2.0;
    case Priority::Low: return 1.0;
  }
  throw std::invalid_argument("priority_factor: unknown priority");
}

double impairment_speed(Impairment imp) {
  switch (imp) {
    case Impairment::None: return 75.0;
    case Impairment::Low: return 60.0;
    case Impairment::High: return 45.0;
  }
  throw std::invalid_argument("impairment_speed: unknown impairment");
}

std::string to_string(HsAgent agent) {
  switch (agent) {
    case HsAgent::Triage: return "triage";
    case HsAgent::Escort: return "escort";
    case HsAgent::Doctor: return "doctor";
  }
  throw std::invalid_argument("to_string: unknown agent");
}

std::array<std::array<double, kLocationCount>, kLocationCount> default_hs_distances() {
  // Everything routes through the corridor hub; psychiatry and resuscitation
  // sit a floor away.
  const double hub[kLocationCount] = {60, 50, 60, 50, 70, 90, 150, 130, 0, 70};
  std::array<std::array<double, kLocationCount>, kLocationCount> d{};
  for (int a = 0; a < kLocationCount; ++a)
    for (int b = 0; b < kLocationCount; ++b)
      d[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = a == b ? 0.0 : hub[a] + hub[b];
  return d;
}

HsConfig::HsConfig() : distances(default_hs_distances()) {}

void HsConfig::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("HsConfig: " + what); };
  if (clerks < 1) bad("clerks must be >= 1");
  if (nurses < 0 || robots < 0 || nurses + robots < 1) bad("need at least one escort staff member");
  if (triage_dispatchers < 1) bad("triage_dispatchers must be >= 1");
  if (swing_doctors < 0) bad("swing_doctors must be >= 0");
  if (ward_doctors_per_ward < 1) bad("ward_doctors_per_ward must be >= 1");
  if (wards != kWardCount) bad("wards must equal 6");
  if (patients_per_day < 1) bad("patients_per_day must be >= 1");
  if (day_length_min <= 0) bad("day_length_min must be positive");
  if (peak_start_min < 0 || peak_end_min > day_length_min || peak_start_min >= peak_end_min)
    bad("peak window must satisfy 0 <= start < end <= day length");
  if (peak_rate_factor <= 0) bad("peak_rate_factor must be positive");
  if (clerk_service_min <= 0 || triage_service_min <= 0) bad("service times must be positive");
  if (treatment_mean_min <= 0 || treatment_max_min < treatment_mean_min)
    bad("treatment duration bounds are inconsistent");
  if (decision_tick_min <= 0) bad("decision_tick_min must be positive");
  if (nurse_speed <= 0 || robot_speed <= 0) bad("staff speeds must be positive");
  for (int a = 0; a < kLocationCount; ++a) {
    if (distances[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)] != 0.0)
      bad("distance matrix diagonal must be zero");
    for (int b = 0; b < kLocationCount; ++b) {
      double ab = distances[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
      if (ab < 0 || !std::isfinite(ab)) bad("distances must be finite and non-negative");
      if (ab != distances[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)])
        bad("distance matrix must be symmetric");
    }
  }
}

Patient sample_patient(Rng& rng) {
  Patient p;
  p.priority = static_cast<Priority>(rng.uniform_index(3));
  p.illness = static_cast<Illness>(rng.uniform_index(6));
  double u = rng.uniform();
  p.impairment = u < 0.60 ? Impairment::None : (u < 0.85 ? Impairment::Low : Impairment::High);
  p.speed = impairment_speed(p.impairment);
  return p;
}

std::vector<double> sample_arrival_times(Rng& rng, const HsConfig& cfg) {
  const double ps = cfg.peak_start_min, pe = cfg.peak_end_min, f = cfg.peak_rate_factor;
  const double mass = (cfg.day_length_min - (pe - ps)) + (pe - ps) * f;
  if (!(mass > 0)) throw std::invalid_argument("sample_arrival_times: arrival rate integrates to zero");
  const double m1 = ps;
  const double m2 = m1 + (pe - ps) * f;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(cfg.patients_per_day));
  for (int i = 0; i < cfg.patients_per_day; ++i) {
    double m = rng.uniform() * mass;
    double t;
    if (m < m1) t = m;
    else if (m < m2) t = ps + (m - m1) / f;
    else t = pe + (m - m2);
    out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

HsState hs_reset(const HsConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  HsState s;
  s.cfg = cfg;
  Rng arrival_rng(substream_seed(seed, "hs.arrivals"));
  Rng patient_rng(substream_seed(seed, "hs.patients"));
  s.day_rng = Rng(substream_seed(seed, "hs.day"));
  std::vector<double> times = sample_arrival_times(arrival_rng, cfg);
  s.patients.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    Patient p = sample_patient(patient_rng);
    p.id = static_cast<int>(i);
    p.arrival_time = times[i];
    s.patients.push_back(p);
  }
  s.staff.reserve(static_cast<std::size_t>(cfg.nurses + cfg.robots));
  for (int i = 0; i < cfg.nurses; ++i) s.staff.push_back(HsStaff{i, false, kLocHub, false});
  for (int i = 0; i < cfg.robots; ++i) s.staff.push_back(HsStaff{cfg.nurses + i, true, kLocHub, false});
  for (int i = 0; i < cfg.swing_doctors; ++i) s.swing.push_back(HsSwingDoctor{i, i % kWardCount, 0.0});
  s.clerk_free.assign(static_cast<std::size_t>(cfg.clerks), 0.0);
  s.triage_free.assign(static_cast<std::size_t>(cfg.triage_dispatchers), 0.0);
  for (const auto& p : s.patients) push_event(s, p.arrival_time, HsEvent::Kind::Arrival, p.id, -1);
  push_event(s, cfg.decision_tick_min, HsEvent::Kind::DoctorRebalance, -1, -1);
  push_event(s, cfg.decision_tick_min, HsEvent::Kind::EscortRequest, -1, 1);
  return s;
}

std::optional<HsDecision> hs_advance(HsState& s) {
  if (s.pending) throw std::logic_error("hs_advance: a decision is outstanding");
  if (s.finished) return std::nullopt;
  while (!s.events.empty()) {
    HsEvent ev = s.events.top();
    if (ev.time > s.cfg.day_length_min) break;
    s.events.pop();
    if (ev.time < s.last_event_time) throw std::logic_error("hs_advance: event time regressed");
    s.last_event_time = ev.time;
    s.now = ev.time;
    handle_event(s, ev);
    if (s.pending) return s.pending;
  }
  finalize_day(s);
  return std::nullopt;
}

void hs_apply(HsState& s, const HsDecision& decision, int action) {
  if (!s.pending) throw std::logic_error("hs_apply: no decision outstanding");
  if (s.pending->agent != decision.agent || s.pending->index != decision.index)
    throw std::logic_error("hs_apply: stale decision request");
  if (action < 0 || action >= s.pending->action_count)
    throw std::invalid_argument("hs_apply: action out of range");
  const HsDecision cur = *s.pending;
  s.pending.reset();
  auto& rewards = s.decision_rewards[static_cast<int>(cur.agent)];
  auto& linked = s.decision_patient[static_cast<int>(cur.agent)];
  switch (cur.agent) {
    case HsAgent::Triage: {
      int idx = static_cast<int>(rewards.size());
      rewards.push_back(0.0);
      linked.push_back(cur.patient);
      s.patients[static_cast<std::size_t>(cur.patient)].triage_decision = idx;
      rewards[static_cast<std::size_t>(idx)] += triage_apply(s, cur.patient, action);
      break;
    }
    case HsAgent::Escort: {
      double reward = 0.0;
      int patient = -1;
      bool assigned = false;
      if (action != kEscortActionCount - 1) {
        auto cls = static_cast<Priority>(action / 2);
        bool robot = action % 2 == 1;
        int rid = -1;
        for (std::size_t i = 0; i < s.escorts.size(); ++i) {
          const auto& r = s.escorts[i];
          if (r.assigned || s.patients[static_cast<std::size_t>(r.patient)].priority != cls) continue;
          if (rid < 0 || r.request_time < s.escorts[static_cast<std::size_t>(rid)].request_time)
            rid = static_cast<int>(i);
        }
        int sid = -1;
        if (rid >= 0) {
          int ploc = s.patients[static_cast<std::size_t>(s.escorts[static_cast<std::size_t>(rid)].patient)].location;
          double best = 0.0;
          for (const auto& st : s.staff) {
            if (st.busy || st.robot != robot) continue;
            double d = dist(s, st.location, ploc);
            if (sid < 0 || d < best) {
              sid = st.id;
              best = d;
            }
          }
        }
        if (rid >= 0 && sid >= 0) {
          reward = escort_apply(s, rid, sid);
          patient = s.escorts[static_cast<std::size_t>(rid)].patient;
          assigned = true;
        }
      }
      reward -= s.cfg.escort_pending_coeff * unassigned_escorts(s);
      rewards.push_back(reward);
      linked.push_back(patient);
      if (assigned) push_event(s, s.now, HsEvent::Kind::EscortRequest, -1, -1);
      break;
    }
    case HsAgent::Doctor: {
      int moves = 0;
      if (action > 0) {
        int target = action - 1;
        int pick = -1;
        std::size_t pick_queue = 0;
        for (auto& d : s.swing) {
          if (d.ward == target || d.available_at > s.now) continue;
          if (movable_swing_bound(s, d.ward) < 1) continue;
          std::size_t q = s.wards[static_cast<std::size_t>(d.ward)].queue.size();
          if (pick < 0 || q < pick_queue) {
            pick = d.id;
            pick_queue = q;
          }
        }
        if (pick >= 0) {
          relocate_swing(s, s.swing[static_cast<std::size_t>(pick)], target);
          moves = 1;
        }
      }
      rewards.push_back(-s.cfg.doctor_move_coeff * moves);
      linked.push_back(-1);
      break;
    }
  }
}

int triage_observation_dim() { return kSymptomCount + 3 + kWardCount; }

Eigen::VectorXd triage_observe(const HsState& s, int patient_id) {
  if (patient_id < 0 || patient_id >= static_cast<int>(s.patients.size()))
    throw std::invalid_argument("triage_observe: patient id out of range");
  const Patient& p = s.patients[static_cast<std::size_t>(patient_id)];
  Eigen::VectorXd o = Eigen::VectorXd::Zero(triage_observation_dim());
  for (Symptom sym : illness_symptoms(p.illness)) o[static_cast<int>(sym)] = 1.0;
  o[kSymptomCount + static_cast<int>(p.priority)] = 1.0;
  for (int w = 0; w < kWardCount; ++w) {
    double expected = static_cast<double>(s.wards[static_cast<std::size_t>(w)].queue.size()) *
                      s.cfg.treatment_mean_min / std::max(1, ward_capacity(s, w));
    o[kSymptomCount + 3 + w] = expected / 60.0;
  }
  return o;
}

double triage_apply(HsState& s, int patient_id, int ward_choice) {
  if (patient_id < 0 || patient_id >= static_cast<int>(s.patients.size()))
    throw std::invalid_argument("triage_apply: patient id out of range");
  if (ward_choice < 0 || ward_choice >= kWardCount)
    throw std::invalid_argument("triage_apply: ward index out of range");
  Patient& p = s.patients[static_cast<std::size_t>(patient_id)];
  if (p.routing != Patient::Routing::Unrouted)
    throw std::logic_error("triage_apply: patient already routed");
  double immediate = 0.0;
  int prim = primary_ward(p.illness);
  int target = ward_choice;
  if (ward_choice == prim) {
    p.routing = Patient::Routing::Perfect;
    s.routed_perfect += 1;
  } else if (ward_weight(p.illness, ward_choice) > 0.0) {
    p.routing = Patient::Routing::Backup;
    s.routed_backup += 1;
  } else {
    p.routing = Patient::Routing::Incorrect;
    s.routed_incorrect += 1;
    immediate = s.cfg.r_incorrect;
    target = prim;  // the misroute is caught at triage and corrected
  }
  p.target_ward = target;
  begin_leg(s, p, kLocTriage, ward_location(target), s.now);
  return immediate;
}

int escort_observation_dim() { return 6; }

Eigen::VectorXd escort_observe(const HsState& s) {
  Eigen::VectorXd o = Eigen::VectorXd::Zero(escort_observation_dim());
  double oldest = -1.0;
  for (const auto& r : s.escorts) {
    if (r.assigned) continue;
    o[static_cast<int>(s.patients[static_cast<std::size_t>(r.patient)].priority)] += 1.0;
    if (oldest < 0 || r.request_time < oldest) oldest = r.request_time;
  }
  o.head(3) /= 10.0;
  o[3] = oldest < 0 ? 0.0 : (s.now - oldest) / 60.0;
  int idle_nurses = 0, idle_robots = 0;
  for (const auto& st : s.staff)
    if (!st.busy) (st.robot ? idle_robots : idle_nurses) += 1;
  o[4] = static_cast<double>(idle_nurses) / std::max(1, s.cfg.nurses);
  o[5] = static_cast<double>(idle_robots) / std::max(1, s.cfg.robots);
  return o;
}

double escort_apply(HsState& s, int request_id, int staff_id) {
  if (request_id < 0 || request_id >= static_cast<int>(s.escorts.size()))
    throw std::invalid_argument("escort_apply: request id out of range");
  if (staff_id < 0 || staff_id >= static_cast<int>(s.staff.size()))
    throw std::invalid_argument("escort_apply: staff id out of range");
  HsEscortRequest& r = s.escorts[static_cast<std::size_t>(request_id)];
  if (r.assigned) throw std::invalid_argument("escort_apply: request already assigned");
  HsStaff& st = s.staff[static_cast<std::size_t>(staff_id)];
  if (st.busy) throw std::invalid_argument("escort_apply: staff member is busy");
  const Patient& p = s.patients[static_cast<std::size_t>(r.patient)];
  double d = dist(s, st.location, p.location);
  double speed = st.robot ? s.cfg.robot_speed : s.cfg.nurse_speed;
  r.assigned = true;
  r.staff = staff_id;
  st.busy = true;
  push_event(s, s.now + d / speed, HsEvent::Kind::EscortAssigned, request_id, staff_id);
  double skill = st.robot ? s.cfg.robot_skill : s.cfg.nurse_skill;
  return priority_factor(p.priority) * skill *
             (s.cfg.escort_proximity_scale / (s.cfg.escort_proximity_scale + d)) -
         s.cfg.escort_wait_coeff * (s.now - r.request_time);
}

int doctor_observation_dim() { return kWardCount * 3; }

Eigen::Vector3d doctor_ward_features(const HsState& s, int ward) {
  if (ward < 0 || ward >= kWardCount) throw std::invalid_argument("doctor_ward_features: ward out of range");
  const auto& w = s.wards[static_cast<std::size_t>(ward)];
  int cap = ward_capacity(s, ward);
  double mean_prio = 0.0;
  if (!w.queue.empty()) {
    for (int pid : w.queue) mean_prio += priority_factor(s.patients[static_cast<std::size_t>(pid)].priority);
    mean_prio /= static_cast<double>(w.queue.size());
  }
  Eigen::Vector3d f;
  f[0] = static_cast<double>(w.queue.size());
  f[1] = cap > 0 ? static_cast<double>(cap - w.busy_doctors) / cap : 0.0;
  f[2] = mean_prio;
  return f;
}

Eigen::VectorXd doctor_observe(const HsState& s) {
  Eigen::VectorXd o(doctor_observation_dim());
  for (int w = 0; w < kWardCount; ++w) {
    Eigen::Vector3d f = doctor_ward_features(s, w);
    o[3 * w] = f[0] / 10.0;
    o[3 * w + 1] = f[1];
    o[3 * w + 2] = f[2] / 3.0;
  }
  return o;
}

int doctor_apply(HsState& s, const std::array<int, kWardCount>& allocation) {
  int total = 0;
  for (int a : allocation) {
    if (a < 0) throw std::invalid_argument("doctor_apply: negative allocation");
    total += a;
  }
  if (total > s.cfg.swing_doctors)
    throw std::invalid_argument("doctor_apply: allocation exceeds the swing doctor pool");
  std::array<int, kWardCount> current{};
  for (const auto& d : s.swing) current[static_cast<std::size_t>(d.ward)] += 1;
  std::vector<int> pool;
  for (int w = 0; w < kWardCount; ++w) {
    int surplus = current[static_cast<std::size_t>(w)] - allocation[static_cast<std::size_t>(w)];
    if (surplus <= 0) continue;
    if (movable_swing_bound(s, w) < surplus)
      throw std::invalid_argument("doctor_apply: cannot relocate busy or in-transit doctors");
    int taken = 0;
    for (const auto& d : s.swing) {
      if (taken == surplus) break;
      if (d.ward == w && d.available_at <= s.now) {
        pool.push_back(d.id);
        ++taken;
      }
    }
  }
  std::sort(pool.begin(), pool.end());
  int moves = 0;
  std::size_t next = 0;
  for (int w = 0; w < kWardCount; ++w) {
    int need = allocation[static_cast<std::size_t>(w)] - current[static_cast<std::size_t>(w)];
    while (need > 0) {
      relocate_swing(s, s.swing[static_cast<std::size_t>(pool[next])], w);
      ++next;
      ++moves;
      --need;
    }
  }
  return moves;
}

std::pair<HsState, HsState> hs_counterfactual_pair(const HsConfig& cfg, std::uint64_t seed) {
  HsState a = hs_reset(cfg, seed);
  HsState b = hs_reset(cfg, seed);
  for (auto& p : b.patients) {
    if (p.impairment == Impairment::None) p.impairment = Impairment::High;
    else if (p.impairment == Impairment::High) p.impairment = Impairment::None;
    p.speed = impairment_speed(p.impairment);
  }
  return {std::move(a), std::move(b)};
}

HsMetrics episode_metrics(const HsState& s) {
  HsMetrics m;
  m.arrivals = static_cast<int>(s.patients.size());
  m.treated = s.treated;
  m.mean_escort_wait = s.escort_legs > 0 ? s.escort_wait_sum / s.escort_legs : 0.0;
  m.mean_escort_travel = s.escort_legs > 0 ? s.escort_travel_sum / s.escort_legs : 0.0;
  m.swing_moves = s.swing_moves;
  int routed = s.routed_perfect + s.routed_backup + s.routed_incorrect;
  if (routed > 0) {
    m.pct_perfect = 100.0 * s.routed_perfect / routed;
    m.pct_backup = 100.0 * s.routed_backup / routed;
    m.pct_incorrect = 100.0 * s.routed_incorrect / routed;
  }
  double sum = 0.0;
  for (const auto& p : s.patients) sum += p.accumulated_reward;
  m.mean_patient_reward = s.patients.empty() ? 0.0 : sum / static_cast<double>(s.patients.size());
  return m;
}

std::map<AgentId, double> hs_patient_returns(const HsState& s) {
  std::map<AgentId, double> out;
  for (const auto& p : s.patients) out[p.id] = p.accumulated_reward;
  return out;
}

std::vector<AgentProfile> hs_patient_profiles(const HsState& s) {
  std::vector<AgentProfile> out;
  out.reserve(s.patients.size());
  for (const auto& p : s.patients) {
    AgentProfile a;
    a.id = p.id;
    a.z = p.z();
    a.lf = static_cast<int>(p.priority);
    a.action_count = 1;
    out.push_back(a);
  }
  return out;
}

std::string hs_invariant_violation(const HsState& s) {
  std::ostringstream msg;
  if (s.last_event_time > s.now + 1e-9) return "event clock ahead of simulation clock";
  if (s.now > s.cfg.day_length_min + 1e-9) return "simulation clock past the end of the day";
  std::vector<int> queue_hits(s.patients.size(), 0);
  for (int w = 0; w < kWardCount; ++w) {
    for (int pid : s.wards[static_cast<std::size_t>(w)].queue) {
      if (pid < 0 || pid >= static_cast<int>(s.patients.size())) return "queue holds an unknown patient id";
      queue_hits[static_cast<std::size_t>(pid)] += 1;
      const Patient& p = s.patients[static_cast<std::size_t>(pid)];
      if (p.stage != Patient::Stage::InQueue) {
        msg << "patient " << pid << " queued at ward " << w << " but not in the queue stage";
        return msg.str();
      }
      if (p.target_ward != w) {
        msg << "patient " << pid << " queued at ward " << w << " but targets ward " << p.target_ward;
        return msg.str();
      }
    }
    const auto& ward = s.wards[static_cast<std::size_t>(w)];
    if (ward.busy_doctors < 0 || ward.busy_doctors > ward_capacity(s, w)) {
      msg << "ward " << w << " has " << ward.busy_doctors << " busy doctors with capacity "
          << ward_capacity(s, w);
      return msg.str();
    }
  }
  for (std::size_t i = 0; i < s.patients.size(); ++i) {
    const Patient& p = s.patients[i];
    if (queue_hits[i] > 1) return "patient queued twice";
    if ((p.stage == Patient::Stage::InQueue) != (queue_hits[i] == 1)) return "queue membership out of sync";
    if (p.wait_minutes < -1e-9) return "negative accumulated wait";
    if (p.z() != (p.impairment == Impairment::None ? 0 : 1)) return "sensitive attribute out of sync";
    if (p.stage == Patient::Stage::Exited && p.treated_ward < 0) return "exited patient was never treated";
  }
  std::vector<int> active_legs(s.staff.size(), 0);
  for (const auto& r : s.escorts) {
    if (r.request_time > s.now + 1e-9) return "escort request from the future";
    if (r.assigned && !r.completed && r.staff >= 0) active_legs[static_cast<std::size_t>(r.staff)] += 1;
  }
  for (std::size_t i = 0; i < s.staff.size(); ++i) {
    if (active_legs[i] > 1) return "staff member escorting two patients";
    if (s.staff[i].busy != (active_legs[i] == 1)) return "staff busy flag out of sync";
  }
  for (const auto& d : s.swing)
    if (d.ward < 0 || d.ward >= kWardCount) return "swing doctor assigned to an unknown ward";
  for (int agent = 0; agent < kHsAgentCount; ++agent) {
    if (s.decision_rewards[agent].size() != s.decision_patient[agent].size())
      return "decision log arrays out of sync";
    if (s.pending && static_cast<int>(s.pending->agent) == agent &&
        s.pending->index != static_cast<int>(s.decision_rewards[agent].size()))
      return "outstanding decision index out of sync";
  }
  return "";
}

}  // namespace fairmarl
