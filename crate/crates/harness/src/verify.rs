//! Standalone audit suites for the queue, aggregation and flow layers.

use std::time::{Duration, Instant};

use lyapcharge::aggregation::{check_p3_feasible, CheckMode};
use lyapcharge::flow::{circulation_disaggregate, hoffman_verify, CirculationNetwork, Disaggregation};
use lyapcharge::model::{fixtures, Ev, EvId, GroupId, PriceSeries, Scenario, TimeGrid};
use lyapcharge::queues::{backlog_recursion, increment_audit, max_plus_min, QueueDiscipline, SkipAhead};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: usize,
    pub violations: usize,
    pub detail: String,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<22} checks={:<9} violations={:<4} {:>8.2?} {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.checks,
            self.violations,
            self.elapsed,
            self.detail
        )
    }
}

/// Random arrival/service corpus: trace `i` uses `w = 1 + i mod max_w`.
pub struct QueueCorpus {
    pub traces: usize,
    pub horizon: usize,
    pub x_bound: f64,
    pub max_w: usize,
    pub seed: u64,
}

impl Default for QueueCorpus {
    fn default() -> Self {
        Self {
            traces: 1000,
            horizon: 240,
            x_bound: 10.0,
            max_w: 8,
            seed: 0,
        }
    }
}

pub struct Trace {
    pub w: usize,
    pub a: Vec<f64>,
    pub x: Vec<f64>,
}

impl QueueCorpus {
    pub fn trace(&self, i: usize) -> Trace {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(i as u64));
        let mut draw = || {
            (0..self.horizon)
                .map(|_| rng.random_range(0.0..=self.x_bound))
                .collect::<Vec<_>>()
        };
        let a = draw();
        let x = draw();
        Trace {
            w: 1 + i % self.max_w,
            a,
            x,
        }
    }
}

const DISCIPLINES: [QueueDiscipline; 2] = [QueueDiscipline::ClampAfter, QueueDiscipline::ServeThenArrive];

pub fn closed_form_suite(corpus: &QueueCorpus) -> SuiteResult {
    let start = Instant::now();
    let (mut checks, mut violations, mut worst) = (0, 0, 0.0f64);
    for i in 0..corpus.traces {
        let tr = corpus.trace(i);
        for d in DISCIPLINES {
            let q = backlog_recursion(&tr.a, &tr.x, tr.w, d).expect("valid corpus");
            let sk = SkipAhead::new(&tr.a, &tr.x, tr.w, d).expect("valid corpus");
            for t in 0..tr.w {
                for n in 1..=(corpus.horizon - 1 - t) / tr.w {
                    let err = (sk.zero_init(t, n).expect("in range") - q[t + n * tr.w]).abs();
                    worst = worst.max(err);
                    checks += 1;
                    if err > 1e-9 {
                        violations += 1;
                    }
                }
            }
        }
    }
    SuiteResult {
        name: "closed-form backlog",
        checks,
        violations,
        detail: format!("max |err| = {worst:.2e}"),
        elapsed: start.elapsed(),
    }
}

pub fn increment_suite(corpus: &QueueCorpus) -> SuiteResult {
    let start = Instant::now();
    let (mut traces, mut violations) = (0, 0);
    for i in 0..corpus.traces {
        let tr = corpus.trace(i);
        for d in DISCIPLINES {
            let q = backlog_recursion(&tr.a, &tr.x, tr.w, d).expect("valid corpus");
            violations += increment_audit(&q, tr.w, corpus.x_bound).len();
            traces += 1;
        }
    }
    SuiteResult {
        name: "increment bounds",
        checks: traces,
        violations,
        detail: "one-step, multi-step, boundary and lookback families".into(),
        elapsed: start.elapsed(),
    }
}

pub fn max_plus_min_suite(pairs: usize, seed: u64) -> SuiteResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..pairs {
        let n = rng.random_range(1..=8);
        let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let beta: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        match max_plus_min(&alpha, &beta) {
            Some((lo, mid, hi)) if lo <= mid && mid <= hi => {}
            _ => violations += 1,
        }
    }
    SuiteResult {
        name: "max-plus-min",
        checks: pairs,
        violations,
        detail: String::new(),
        elapsed: start.elapsed(),
    }
}

/// A one-group instance with integer data (η = 1, Δt = 1 h) and a per-EV
/// schedule that meets every EV's constraints.
pub struct MicroInstance {
    pub scenario: Scenario<f64>,
    pub schedule: Vec<Vec<f64>>,
}

impl MicroInstance {
    pub fn aggregate(&self) -> Vec<f64> {
        let horizon = self.scenario.num_slots();
        (0..horizon).map(|t| self.schedule.iter().map(|p| p[t]).sum()).collect()
    }
}

pub fn micro_instance(rng: &mut ChaCha8Rng, max_evs: usize, max_slots: usize) -> MicroInstance {
    let horizon = rng.random_range(1..=max_slots);
    let evs = rng.random_range(1..=max_evs);
    let mut fleet = Vec::new();
    let mut schedule = Vec::new();
    for i in 0..evs {
        let arrival = rng.random_range(0..horizon);
        let departure = rng.random_range(arrival + 1..=horizon);
        let p_max = rng.random_range(1..=3) as f64;
        let mut power = vec![0.0; horizon];
        for p in &mut power[arrival..departure] {
            *p = rng.random_range(0..=p_max as u32) as f64;
        }
        if power.iter().all(|&p| p == 0.0) {
            power[arrival] = p_max;
        }
        let units: f64 = power.iter().sum();
        let e_req = if rng.random_bool(0.5) {
            units
        } else {
            (units / 2.0).ceil()
        };
        let e_max = units + rng.random_range(0..=1) as f64;
        fleet.push(Ev {
            id: EvId(i as u32 + 1),
            group_id: GroupId(0),
            p_max,
            e_req,
            e_max,
            e_cap: e_max + 1.0,
            arrival_slot: arrival,
            departure_slot: departure,
        });
        schedule.push(power);
    }
    let prices = PriceSeries::new(vec![1.0; horizon]).expect("non-empty");
    MicroInstance {
        scenario: Scenario::new(TimeGrid::new(horizon, 1.0), fleet, prices, 1.0, 1, 1.0),
        schedule,
    }
}

/// Every integer aggregate schedule between zero and the group cap.
pub fn integer_grid(caps: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for &cap in caps {
        let levels = cap.floor() as usize;
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=levels).map(move |k| {
                    let mut x = prefix.clone();
                    x.push(k as f64);
                    x
                })
            })
            .collect();
    }
    out
}

/// Checks that per-EV schedules meet P1 and sum to `x`.
pub fn schedules_feasible(s: &Scenario<f64>, x: &[f64], schedules: &[(EvId, Vec<f64>)]) -> bool {
    const TOL: f64 = 1e-5;
    let (eta, dt) = (s.eta, s.dt());
    let sums_match = (0..x.len()).all(|t| (schedules.iter().map(|(_, p)| p[t]).sum::<f64>() - x[t]).abs() <= TOL);
    sums_match
        && schedules.iter().all(|(id, p)| {
            let ev = &s.fleet[s.ev_index(*id).expect("member")];
            let cap = ev.slot_cap(eta, dt);
            let total: f64 = p.iter().sum();
            p.iter()
                .enumerate()
                .all(|(t, &v)| v >= -TOL && v <= cap + TOL && (ev.is_active(t) || v.abs() <= TOL))
                && total >= ev.req_units(eta, dt) - TOL
                && total <= ev.max_units(eta, dt) + TOL
        })
}

/// Soundness of the window bounds, exactness of the circulation, agreement
/// with the subset enumeration, and the two-EV witness.
pub fn aggregation_suite(instances: usize, seed: u64) -> SuiteResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checks, mut violations) = (0usize, 0usize);
    let mut notes = Vec::new();
    let g = GroupId(0);
    for k in 0..instances {
        let inst = micro_instance(&mut rng, 3, 4);
        let s = &inst.scenario;
        let aggregate = inst.aggregate();
        checks += 1;
        if !matches!(check_p3_feasible(s, g, &aggregate, CheckMode::Exhaustive), Ok(v) if v.is_feasible()) {
            violations += 1;
            notes.push(format!("instance {k}: aggregated P1 schedule rejected"));
        }
        let caps = s.cap_series(0);
        for (j, x) in integer_grid(&caps).into_iter().enumerate() {
            let p3 = check_p3_feasible(s, g, &x, CheckMode::Exhaustive).expect("valid input");
            let flow = circulation_disaggregate(s, g, &x).expect("within caps");
            checks += 1;
            let agree = match (&flow, p3.is_feasible()) {
                (Disaggregation::Feasible(parts), true) => {
                    let parts: Vec<_> = parts.iter().map(|e| (e.ev, e.power.clone())).collect();
                    schedules_feasible(s, &x, &parts)
                }
                (Disaggregation::Infeasible(_), false) => true,
                _ => false,
            };
            if !agree {
                violations += 1;
                notes.push(format!("instance {k}: P3 and circulation disagree on {x:?}"));
            }
            if j % 7 == 0 {
                let net = CirculationNetwork::build(s, g, &x).expect("valid input");
                let hoffman = hoffman_verify(&net).expect("small network");
                checks += 1;
                if hoffman.holds() != flow.is_feasible() {
                    violations += 1;
                    notes.push(format!("instance {k}: Hoffman disagrees on {x:?}"));
                }
            }
        }
    }
    let two = fixtures::two_ev::<f64>([2.0, 1.0]);
    let verdict = check_p3_feasible(&two, GroupId(0), &[0.0, 2.0], CheckMode::Exhaustive).expect("valid input");
    checks += 1;
    if verdict.witness() != Some(&[1][..]) {
        violations += 1;
        notes.push(format!("two-EV witness {:?}", verdict.witness()));
    }
    notes.truncate(3);
    SuiteResult {
        name: "aggregation and flow",
        checks,
        violations,
        detail: notes.join("; "),
        elapsed: start.elapsed(),
    }
}

pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    let corpus = QueueCorpus {
        seed,
        ..QueueCorpus::default()
    };
    vec![
        closed_form_suite(&corpus),
        increment_suite(&corpus),
        max_plus_min_suite(10_000, seed),
        aggregation_suite(200, seed),
    ]
}
