use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::Draw;
use crate::distributions::DiscreteDistribution;
use crate::ego::DesignSpace;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Interarrival, ICU stay, CCU stay, intermediate stay after ICU,
/// intermediate stay after CCU, route.
pub const CCF_INPUTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Icu,
    Ccu,
}

/// Where a patient of one route goes first and whether they step down to
/// intermediate care afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub unit: Unit,
    pub step_down: bool,
}

/// Route values 1..=4 index `routes`; a sampled value `v` maps to
/// `ceil(v)` clamped to that range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingMap {
    pub routes: [Route; 4],
}

impl Default for RoutingMap {
    fn default() -> Self {
        let r = |unit, step_down| Route { unit, step_down };
        Self {
            routes: [
                r(Unit::Icu, false),
                r(Unit::Ccu, false),
                r(Unit::Icu, true),
                r(Unit::Ccu, true),
            ],
        }
    }
}

impl RoutingMap {
    pub fn route(&self, value: f64) -> Route {
        let k = if value.is_nan() { 1.0 } else { value.ceil().clamp(1.0, 4.0) };
        self.routes[k as usize - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CcfConfig {
    pub days: f64,
    pub warmup: f64,
    pub routing: RoutingMap,
}

impl Default for CcfConfig {
    fn default() -> Self {
        Self {
            days: 300.0,
            warmup: 300.0,
            routing: RoutingMap::default(),
        }
    }
}

/// Counts from one replication. Flow conservation holds exactly:
/// `arrivals = denials + exits + in_system`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CcfRun {
    pub arrivals: u64,
    pub denials: u64,
    pub counted_denials: u64,
    pub exits: u64,
    pub in_system: u64,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Arrival,
    UnitEnd(Unit, usize),
    IcEnd,
}

#[derive(Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // min-heap on (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

struct Queue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, time: f64, kind: Kind) {
        self.heap.push(Event { time, seq: self.seq, kind });
        self.seq += 1;
    }
}

/// Beds from a design vector `(ICU, CCU, IC)`.
fn beds(x: &[f64]) -> Result<[usize; 3]> {
    if x.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: x.len() });
    }
    let mut b = [0; 3];
    for (k, v) in x.iter().enumerate() {
        if !(v.is_finite() && *v >= 0.0) {
            return Err(Error::InvalidParameter(format!("bed count {v}")));
        }
        b[k] = v.round() as usize;
    }
    Ok(b)
}

/// One replication of the critical-care facility. Each input process
/// draws from its own substream seeded from `rng`.
pub fn ccf_run<D: Draw, R: Rng + ?Sized>(x: &[f64], inputs: &[D], cfg: &CcfConfig, rng: &mut R) -> Result<CcfRun> {
    if inputs.len() != CCF_INPUTS {
        return Err(Error::DimensionMismatch {
            expected: CCF_INPUTS,
            got: inputs.len(),
        });
    }
    let capacity = beds(x)?;
    let mut streams: Vec<StreamRng> = (0..CCF_INPUTS).map(|_| StreamRng::seed_from_u64(rng.random())).collect();
    let horizon = cfg.warmup + cfg.days;

    let mut busy = [0usize; 3];
    // patients holding an ICU/CCU bed while waiting for intermediate care
    let mut waiting: VecDeque<(Unit, f64)> = VecDeque::new();
    let mut run = CcfRun::default();
    let mut q = Queue {
        heap: BinaryHeap::new(),
        seq: 0,
    };
    let first = inputs[0].draw(&mut streams[0]);
    q.push(first, Kind::Arrival);

    let slot = |u: Unit| match u {
        Unit::Icu => 0,
        Unit::Ccu => 1,
    };

    while let Some(ev) = q.heap.pop() {
        if ev.time > horizon {
            break;
        }
        let now = ev.time;
        match ev.kind {
            Kind::Arrival => {
                run.arrivals += 1;
                let next = now + inputs[0].draw(&mut streams[0]);
                q.push(next, Kind::Arrival);
                let route = cfg.routing.route(inputs[5].draw(&mut streams[5]));
                let k = slot(route.unit);
                if busy[k] < capacity[k] {
                    busy[k] += 1;
                    let stay = inputs[1 + k].draw(&mut streams[1 + k]);
                    q.push(now + stay, Kind::UnitEnd(route.unit, route.step_down as usize));
                } else {
                    run.denials += 1;
                    if now >= cfg.warmup {
                        run.counted_denials += 1;
                    }
                }
            }
            Kind::UnitEnd(unit, step_down) => {
                let k = slot(unit);
                if step_down == 0 {
                    busy[k] -= 1;
                    run.exits += 1;
                    continue;
                }
                let stay = inputs[3 + k].draw(&mut streams[3 + k]);
                if busy[2] < capacity[2] {
                    busy[k] -= 1;
                    busy[2] += 1;
                    q.push(now + stay, Kind::IcEnd);
                } else {
                    waiting.push_back((unit, stay));
                }
            }
            Kind::IcEnd => {
                busy[2] -= 1;
                run.exits += 1;
                if let Some((unit, stay)) = waiting.pop_front() {
                    busy[slot(unit)] -= 1;
                    busy[2] += 1;
                    q.push(now + stay, Kind::IcEnd);
                }
            }
        }
    }
    run.in_system = (busy[0] + busy[1] + busy[2]) as u64;
    Ok(run)
}

/// Denials per day after warmup for one replication.
pub fn ccf_simulate<R: Rng + ?Sized>(x: &[f64], inputs: &[DiscreteDistribution], cfg: &CcfConfig, rng: &mut R) -> Result<f64> {
    let samplers: Vec<_> = inputs.iter().map(|d| d.sampler()).collect();
    let run = ccf_run(x, &samplers, cfg, rng)?;
    Ok(run.counted_denials as f64 / cfg.days)
}

/// All positive integer `(ICU, CCU, IC)` with `26 ≤ ICU + CCU + IC/2 ≤ 28`.
pub fn enumerate_ccf_designs() -> DesignSpace {
    let mut out = Vec::new();
    for a in 1..=28u32 {
        for b in 1..=28u32 {
            for c in 1..=56u32 {
                let total = 2 * (a + b) + c;
                if (52..=56).contains(&total) {
                    out.push(vec![a as f64, b as f64, c as f64]);
                }
            }
        }
    }
    DesignSpace::new_finite(out).expect("nonempty design set")
}
