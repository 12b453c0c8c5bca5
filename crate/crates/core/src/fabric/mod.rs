//! Physical layer: heralded entanglement generation, swaps, one-qubit-per-link
//! memories and the ground-truth pair tracker.
//!
//! The fabric does not own a clock. Callers pass `now` in and drain
//! [`Fabric::take_scheduled`] into their event queue; when a scheduled
//! [`FabricEvent`] fires they hand it back to [`Fabric::handle`], which
//! returns the [`Signal`]s due to devices at that instant.

mod bell;
mod engine;
mod physics;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::arch::NodeId;

pub use bell::{bell_name, compose_bell, BellIndex};
pub use engine::{EventQueue, Scheduled};
pub use physics::{HeraldBells, PhysicsConfig, DEFAULT_T_PREP_NS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct QubitRef {
    pub node: NodeId,
    pub port: u16,
}

impl QubitRef {
    pub fn new(node: NodeId, port: u16) -> Self {
        QubitRef { node, port }
    }
}

impl std::fmt::Display for QubitRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.node, self.port)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitState {
    Free,
    /// Photon in flight for generation attempt `token`.
    Pending(u64),
    Entangled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EntangledPairRecord {
    pub id: u64,
    pub qubit_a: QubitRef,
    pub qubit_b: QubitRef,
    pub bell: BellIndex,
    pub created_at: u64,
}

impl EntangledPairRecord {
    pub fn partner_of(&self, q: QubitRef) -> Option<QubitRef> {
        if q == self.qubit_a {
            Some(self.qubit_b)
        } else if q == self.qubit_b {
            Some(self.qubit_a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FabricError {
    #[error("qubit {0} is not entangled")]
    QubitNotEntangled(QubitRef),
    #[error("swap needs two distinct qubits")]
    SameQubit,
    #[error("no generation process {0}")]
    UnitUnbound(u64),
}

/// Physical-layer outcome delivered to a device's QControl block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Signal {
    Herald {
        node: NodeId,
        bsm_id: u16,
        success: bool,
        bell: BellIndex,
    },
    SwapOutcome {
        node: NodeId,
        bsm_id: u16,
        success: bool,
        m: BellIndex,
    },
}

impl Signal {
    pub fn node(&self) -> NodeId {
        match self {
            Signal::Herald { node, .. } | Signal::SwapOutcome { node, .. } => *node,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FabricEvent {
    Cycle { gen: u64 },
    Bsm { gen: u64, token: u64 },
    SwapDone { swap: u64 },
    Deliver(Signal),
}

/// Endpoint of a heralded link: a memory qubit and the fibre length from it
/// to the hub.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEnd {
    pub qubit: QubitRef,
    pub km: f64,
}

#[derive(Debug, Clone)]
struct Generation {
    hub: NodeId,
    bsm_id: u16,
    ends: [LinkEnd; 2],
    delays: [u64; 2],
    p: f64,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone)]
struct PendingSwap {
    node: NodeId,
    bsm_id: u16,
    qubits: [QubitRef; 2],
    pairs: [u64; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FabricStats {
    pub attempts: u64,
    pub skipped_cycles: u64,
    pub heralds_ok: u64,
    pub heralds_failed: u64,
    pub swaps_ok: u64,
    pub swaps_failed: u64,
    pub releases: u64,
    pub pairs_created: u64,
    pub pairs_destroyed: u64,
}

#[derive(Debug, Clone)]
pub struct Fabric {
    physics: PhysicsConfig,
    seed: u64,
    qubits: BTreeMap<QubitRef, QubitState>,
    pairs: BTreeMap<u64, EntangledPairRecord>,
    gens: BTreeMap<u64, Generation>,
    swaps: BTreeMap<u64, PendingSwap>,
    link_starts: BTreeMap<(NodeId, QubitRef, QubitRef), u64>,
    swap_rngs: BTreeMap<NodeId, ChaCha8Rng>,
    next_id: u64,
    outbox: Vec<(u64, FabricEvent)>,
    pub stats: FabricStats,
}

/// SplitMix64 finalizer, used to derive independent RNG substreams.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn substream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let s = parts.iter().fold(mix64(seed), |acc, p| mix64(acc ^ p));
    ChaCha8Rng::seed_from_u64(s)
}

impl Fabric {
    pub fn new(physics: PhysicsConfig, seed: u64) -> Self {
        Fabric {
            physics,
            seed,
            qubits: BTreeMap::new(),
            pairs: BTreeMap::new(),
            gens: BTreeMap::new(),
            swaps: BTreeMap::new(),
            link_starts: BTreeMap::new(),
            swap_rngs: BTreeMap::new(),
            next_id: 1,
            outbox: Vec::new(),
            stats: FabricStats::default(),
        }
    }

    pub fn physics(&self) -> &PhysicsConfig {
        &self.physics
    }

    /// Registers a memory qubit (FREE).
    pub fn add_qubit(&mut self, q: QubitRef) {
        self.qubits.entry(q).or_insert(QubitState::Free);
    }

    pub fn qubit_state(&self, q: QubitRef) -> QubitState {
        self.qubits.get(&q).copied().unwrap_or(QubitState::Free)
    }

    /// Events to be scheduled by the caller, in push order.
    pub fn take_scheduled(&mut self) -> Vec<(u64, FabricEvent)> {
        std::mem::take(&mut self.outbox)
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    // ----- ground truth -----

    pub fn ground_truth(&self, q: QubitRef) -> Option<(QubitRef, BellIndex)> {
        match self.qubit_state(q) {
            QubitState::Entangled(id) => {
                let p = &self.pairs[&id];
                Some((p.partner_of(q).expect("pair contains its qubit"), p.bell))
            }
            _ => None,
        }
    }

    pub fn pair_of(&self, q: QubitRef) -> Option<&EntangledPairRecord> {
        match self.qubit_state(q) {
            QubitState::Entangled(id) => self.pairs.get(&id),
            _ => None,
        }
    }

    pub fn live_pairs(&self) -> impl Iterator<Item = &EntangledPairRecord> {
        self.pairs.values()
    }

    /// Cross-checks the qubit table against the pair records.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = BTreeMap::new();
        for p in self.pairs.values() {
            if p.qubit_a == p.qubit_b {
                return Err(format!("pair {} is a self-pair", p.id));
            }
            for q in [p.qubit_a, p.qubit_b] {
                if let Some(other) = seen.insert(q, p.id) {
                    return Err(format!("qubit {q} in pairs {other} and {}", p.id));
                }
                if self.qubit_state(q) != QubitState::Entangled(p.id) {
                    return Err(format!("qubit {q} state disagrees with pair {}", p.id));
                }
            }
        }
        for (q, s) in &self.qubits {
            if let QubitState::Entangled(id) = s {
                if seen.get(q) != Some(id) {
                    return Err(format!("qubit {q} points at dead pair {id}"));
                }
            }
        }
        let s = &self.stats;
        if s.pairs_created - s.pairs_destroyed != self.pairs.len() as u64 {
            return Err("pair conservation violated".into());
        }
        Ok(())
    }

    fn destroy_pair(&mut self, id: u64) -> Option<EntangledPairRecord> {
        let p = self.pairs.remove(&id)?;
        self.stats.pairs_destroyed += 1;
        for q in [p.qubit_a, p.qubit_b] {
            self.qubits.insert(q, QubitState::Free);
        }
        Some(p)
    }

    fn create_pair(&mut self, a: QubitRef, b: QubitRef, bell: BellIndex, now: u64) -> u64 {
        let id = self.fresh_id();
        self.pairs.insert(
            id,
            EntangledPairRecord {
                id,
                qubit_a: a,
                qubit_b: b,
                bell,
                created_at: now,
            },
        );
        self.qubits.insert(a, QubitState::Entangled(id));
        self.qubits.insert(b, QubitState::Entangled(id));
        self.stats.pairs_created += 1;
        id
    }

    // ----- generation -----

    /// Starts repeating attempt cycles on a hub BSM unit. The first cycle
    /// begins at `now`. Returns a handle for [`Self::stop_generation`].
    pub fn start_generation(
        &mut self,
        hub: NodeId,
        bsm_id: u16,
        a: LinkEnd,
        b: LinkEnd,
        now: u64,
    ) -> u64 {
        let key = (hub, a.qubit, b.qubit);
        let n = self.link_starts.entry(key).or_insert(0);
        *n += 1;
        let rng = substream(
            self.seed,
            &[
                0x6c696e6b,
                hub as u64,
                ((a.qubit.node as u64) << 16) | a.qubit.port as u64,
                ((b.qubit.node as u64) << 16) | b.qubit.port as u64,
                *n,
            ],
        );
        let gen = self.fresh_id();
        self.add_qubit(a.qubit);
        self.add_qubit(b.qubit);
        self.gens.insert(
            gen,
            Generation {
                hub,
                bsm_id,
                ends: [a, b],
                delays: [self.physics.delay_ns(a.km), self.physics.delay_ns(b.km)],
                p: self.physics.p_attempt(a.km, b.km),
                rng,
            },
        );
        self.outbox.push((now, FabricEvent::Cycle { gen }));
        gen
    }

    /// Halts a generation process. Attempts in flight are discarded and
    /// their qubits freed.
    pub fn stop_generation(&mut self, gen: u64) -> Result<(), FabricError> {
        let g = self
            .gens
            .remove(&gen)
            .ok_or(FabricError::UnitUnbound(gen))?;
        for e in g.ends {
            if let QubitState::Pending(_) = self.qubit_state(e.qubit) {
                self.qubits.insert(e.qubit, QubitState::Free);
            }
        }
        Ok(())
    }

    pub fn is_generating(&self, gen: u64) -> bool {
        self.gens.contains_key(&gen)
    }

    fn on_cycle(&mut self, gen: u64, now: u64) {
        let Some(g) = self.gens.get(&gen) else { return };
        let [a, b] = g.ends;
        let max_delay = g.delays[0].max(g.delays[1]);
        let bsm_at = now + self.physics.t_prep_ns + max_delay;
        let free = |s: QubitState| s == QubitState::Free;
        if free(self.qubit_state(a.qubit)) && free(self.qubit_state(b.qubit)) {
            let token = self.fresh_id();
            self.qubits.insert(a.qubit, QubitState::Pending(token));
            self.qubits.insert(b.qubit, QubitState::Pending(token));
            self.stats.attempts += 1;
            self.outbox.push((bsm_at, FabricEvent::Bsm { gen, token }));
        } else {
            self.stats.skipped_cycles += 1;
            self.outbox
                .push((bsm_at + max_delay, FabricEvent::Cycle { gen }));
        }
    }

    fn on_bsm(&mut self, gen: u64, token: u64, now: u64) -> Vec<Signal> {
        let Some(g) = self.gens.get_mut(&gen) else {
            return Vec::new();
        };
        let [a, b] = g.ends;
        let delays = g.delays;
        let (hub, bsm_id) = (g.hub, g.bsm_id);
        let p = g.p;
        let intact = [a, b]
            .iter()
            .all(|e| self.qubits.get(&e.qubit) == Some(&QubitState::Pending(token)));
        let g = self.gens.get_mut(&gen).expect("checked above");
        let draw = g.rng.random::<f64>();
        let success = intact && draw < p;
        let bell = if success {
            match self.physics.herald_bells {
                HeraldBells::PsiOnly => [1, 3][g.rng.random_range(0..2usize)],
                HeraldBells::All => g.rng.random_range(0..4u8),
            }
        } else {
            0
        };
        if success {
            self.create_pair(a.qubit, b.qubit, bell, now);
            self.stats.heralds_ok += 1;
        } else {
            for e in [a, b] {
                if self.qubits.get(&e.qubit) == Some(&QubitState::Pending(token)) {
                    self.qubits.insert(e.qubit, QubitState::Free);
                }
            }
            self.stats.heralds_failed += 1;
        }
        for (e, d) in [a, b].iter().zip(delays) {
            let sig = Signal::Herald {
                node: e.qubit.node,
                bsm_id,
                success,
                bell,
            };
            self.outbox.push((now + d, FabricEvent::Deliver(sig)));
        }
        // After the herald deliveries so that, at equal times, nodes see
        // the herald before the next attempt starts.
        self.outbox
            .push((now + delays[0].max(delays[1]), FabricEvent::Cycle { gen }));
        vec![Signal::Herald {
            node: hub,
            bsm_id,
            success,
            bell,
        }]
    }

    // ----- swaps and release -----

    /// Starts a swap at `node`. The outcome arrives after `swap_duration_ns`.
    pub fn swap_bsm(
        &mut self,
        node: NodeId,
        q0: u16,
        q1: u16,
        bsm_id: u16,
        now: u64,
    ) -> Result<u64, FabricError> {
        if q0 == q1 {
            return Err(FabricError::SameQubit);
        }
        let qs = [QubitRef::new(node, q0), QubitRef::new(node, q1)];
        let mut pairs = [0; 2];
        for (i, q) in qs.iter().enumerate() {
            match self.qubit_state(*q) {
                QubitState::Entangled(id) => pairs[i] = id,
                _ => return Err(FabricError::QubitNotEntangled(*q)),
            }
        }
        let swap = self.fresh_id();
        self.swaps.insert(
            swap,
            PendingSwap {
                node,
                bsm_id,
                qubits: qs,
                pairs,
            },
        );
        self.outbox.push((
            now + self.physics.swap_duration_ns,
            FabricEvent::SwapDone { swap },
        ));
        Ok(swap)
    }

    fn on_swap_done(&mut self, swap: u64, now: u64) -> Vec<Signal> {
        let Some(s) = self.swaps.remove(&swap) else {
            return Vec::new();
        };
        let seed = self.seed;
        let rng = self
            .swap_rngs
            .entry(s.node)
            .or_insert_with(|| substream(seed, &[0x73776170, s.node as u64]));
        let ok_draw = rng.random::<f64>();
        let m: BellIndex = rng.random_range(0..4u8);
        // Both captured pairs must still be live on the swapped qubits.
        let live: Vec<Option<EntangledPairRecord>> = s
            .pairs
            .iter()
            .zip(&s.qubits)
            .map(|(id, q)| {
                self.pairs
                    .get(id)
                    .filter(|p| p.partner_of(*q).is_some())
                    .copied()
            })
            .collect();
        let success = live.iter().all(Option::is_some) && ok_draw < self.physics.swap_success_prob;
        for p in live.iter().flatten() {
            self.destroy_pair(p.id);
        }
        if success {
            let (p0, p1) = (live[0].unwrap(), live[1].unwrap());
            let far0 = p0.partner_of(s.qubits[0]).expect("filtered");
            let far1 = p1.partner_of(s.qubits[1]).expect("filtered");
            self.create_pair(far0, far1, compose_bell(p0.bell, p1.bell, m), now);
            self.stats.swaps_ok += 1;
        } else {
            self.stats.swaps_failed += 1;
        }
        vec![Signal::SwapOutcome {
            node: s.node,
            bsm_id: s.bsm_id,
            success,
            m: if success { m } else { 0 },
        }]
    }

    /// Frees `q`, destroying any pair it belongs to. Returns the partner
    /// that was freed with it.
    pub fn release_qubit(&mut self, q: QubitRef) -> Option<QubitRef> {
        self.stats.releases += 1;
        match self.qubit_state(q) {
            QubitState::Free => None,
            QubitState::Pending(_) => {
                self.qubits.insert(q, QubitState::Free);
                None
            }
            QubitState::Entangled(id) => self.destroy_pair(id).and_then(|p| p.partner_of(q)),
        }
    }

    /// Processes a due event. Returns signals to hand to devices now.
    pub fn handle(&mut self, ev: FabricEvent, now: u64) -> Vec<Signal> {
        match ev {
            FabricEvent::Cycle { gen } => {
                self.on_cycle(gen, now);
                Vec::new()
            }
            FabricEvent::Bsm { gen, token } => self.on_bsm(gen, token, now),
            FabricEvent::SwapDone { swap } => self.on_swap_done(swap, now),
            FabricEvent::Deliver(sig) => vec![sig],
        }
    }
}

#[cfg(test)]
mod tests;
