use super::*;

const HUB: NodeId = 0;
const A: NodeId = 1;
const B: NodeId = 2;

fn physics(p: f64) -> PhysicsConfig {
    PhysicsConfig {
        optical_bsm_efficiency: p,
        attenuation_db_per_km: 0.0,
        ..PhysicsConfig::default()
    }
}

/// Drives a fabric with its own queue; returns delivered signals with times.
fn run(f: &mut Fabric, until: u64) -> Vec<(u64, Signal)> {
    let mut q = EventQueue::new();
    let mut out = Vec::new();
    for (t, e) in f.take_scheduled() {
        q.push(t, e);
    }
    q.run_until(until, |q, s| {
        for sig in f.handle(s.event, s.time) {
            out.push((s.time, sig));
        }
        for (t, e) in f.take_scheduled() {
            q.push(t, e);
        }
    });
    out
}

fn ends(km: f64) -> (LinkEnd, LinkEnd) {
    (
        LinkEnd {
            qubit: QubitRef::new(A, 0),
            km,
        },
        LinkEnd {
            qubit: QubitRef::new(B, 0),
            km,
        },
    )
}

#[test]
fn p_zero_never_succeeds() {
    let mut f = Fabric::new(physics(0.0), 1);
    let (a, b) = ends(5.0);
    f.start_generation(HUB, 9, a, b, 0);
    let sigs = run(&mut f, 10_000_000);
    assert!(!sigs.is_empty());
    assert!(sigs
        .iter()
        .all(|(_, s)| matches!(s, Signal::Herald { success: false, .. })));
    assert_eq!(f.live_pairs().count(), 0);
}

#[test]
fn p_one_first_cycle_timing() {
    let mut f = Fabric::new(physics(1.0), 1);
    let (a, b) = ends(5.0);
    f.start_generation(HUB, 9, a, b, 1_000);
    let sigs = run(&mut f, 1_000_000);
    let t_prep = f.physics().t_prep_ns;
    let at_hub: Vec<_> = sigs.iter().filter(|(_, s)| s.node() == HUB).collect();
    let at_a: Vec<_> = sigs.iter().filter(|(_, s)| s.node() == A).collect();
    // Both qubits stay entangled, so only one attempt happens.
    assert_eq!(at_hub.len(), 1);
    assert_eq!(at_hub[0].0, 1_000 + t_prep + 25_000);
    assert_eq!(at_a.len(), 1);
    assert_eq!(at_a[0].0, 1_000 + t_prep + 2 * 25_000);
    let Signal::Herald {
        success,
        bell,
        bsm_id,
        ..
    } = at_a[0].1
    else {
        panic!()
    };
    assert!(success);
    assert_eq!(bsm_id, 9);
    assert!(bell == 1 || bell == 3);
    assert_eq!(
        f.ground_truth(QubitRef::new(A, 0)),
        Some((QubitRef::new(B, 0), bell))
    );
    assert!(f.stats.skipped_cycles > 0);
}

#[test]
fn release_resumes_generation() {
    let mut f = Fabric::new(physics(1.0), 1);
    let (a, b) = ends(1.0);
    f.start_generation(HUB, 9, a, b, 0);
    let mut q = EventQueue::new();
    let pump = |f: &mut Fabric, q: &mut EventQueue<FabricEvent>, until: u64| {
        for (t, e) in f.take_scheduled() {
            q.push(t, e);
        }
        q.run_until(until, |q, s| {
            f.handle(s.event, s.time);
            for (t, e) in f.take_scheduled() {
                q.push(t, e);
            }
        });
    };
    pump(&mut f, &mut q, 100_000);
    assert_eq!(f.stats.pairs_created, 1);
    assert_eq!(
        f.release_qubit(QubitRef::new(A, 0)),
        Some(QubitRef::new(B, 0))
    );
    assert_eq!(f.ground_truth(QubitRef::new(B, 0)), None);
    assert_eq!(f.release_qubit(QubitRef::new(A, 0)), None);
    pump(&mut f, &mut q, 200_000);
    assert_eq!(f.stats.pairs_created, 2);
    f.check_invariants().unwrap();
}

#[test]
fn stop_generation_discards_attempts() {
    let mut f = Fabric::new(physics(1.0), 1);
    let (a, b) = ends(5.0);
    let g = f.start_generation(HUB, 9, a, b, 0);
    let mut q = EventQueue::new();
    for (t, e) in f.take_scheduled() {
        q.push(t, e);
    }
    // Fire the first cycle only, then stop.
    let s = q.pop().unwrap();
    f.handle(s.event, s.time);
    assert!(matches!(f.qubit_state(a.qubit), QubitState::Pending(_)));
    f.stop_generation(g).unwrap();
    assert_eq!(f.qubit_state(a.qubit), QubitState::Free);
    for (t, e) in f.take_scheduled() {
        q.push(t, e);
    }
    let mut sigs = 0;
    q.run_until(u64::MAX, |_, s| sigs += f.handle(s.event, s.time).len());
    assert_eq!(sigs, 0);
    assert_eq!(f.stop_generation(g), Err(FabricError::UnitUnbound(g)));
}

fn swap_setup(b0: BellIndex, b1: BellIndex) -> Fabric {
    let mut f = Fabric::new(PhysicsConfig::default(), 3);
    f.create_pair(QubitRef::new(A, 0), QubitRef::new(3, 0), b0, 0);
    f.create_pair(QubitRef::new(3, 1), QubitRef::new(B, 0), b1, 0);
    f
}

#[test]
fn swap_composes_bell_indices() {
    for b0 in 0..4 {
        for b1 in 0..4 {
            let mut f = swap_setup(b0, b1);
            f.swap_bsm(3, 0, 1, 44, 100).unwrap();
            let sigs = run(&mut f, u64::MAX);
            assert_eq!(sigs.len(), 1);
            let (
                t,
                Signal::SwapOutcome {
                    node,
                    bsm_id,
                    success,
                    m,
                },
            ) = sigs[0]
            else {
                panic!()
            };
            assert_eq!(
                (t, node, bsm_id, success),
                (100 + f.physics().swap_duration_ns, 3, 44, true)
            );
            let (partner, bell) = f.ground_truth(QubitRef::new(A, 0)).unwrap();
            assert_eq!(partner, QubitRef::new(B, 0));
            assert_eq!(bell, b0 ^ b1 ^ m);
            assert_eq!(f.qubit_state(QubitRef::new(3, 0)), QubitState::Free);
            f.check_invariants().unwrap();
        }
    }
}

#[test]
fn swap_errors() {
    let mut f = swap_setup(0, 0);
    assert_eq!(f.swap_bsm(3, 0, 0, 1, 0), Err(FabricError::SameQubit));
    assert_eq!(
        f.swap_bsm(3, 0, 7, 1, 0),
        Err(FabricError::QubitNotEntangled(QubitRef::new(3, 7)))
    );
}

#[test]
fn swap_after_release_fails() {
    let mut f = swap_setup(1, 2);
    f.swap_bsm(3, 0, 1, 44, 0).unwrap();
    f.release_qubit(QubitRef::new(A, 0));
    let sigs = run(&mut f, u64::MAX);
    assert!(matches!(
        sigs[0].1,
        Signal::SwapOutcome { success: false, .. }
    ));
    assert_eq!(f.live_pairs().count(), 0);
    f.check_invariants().unwrap();
}

#[test]
fn success_rate_matches_p_attempt() {
    let phys = PhysicsConfig::default();
    let p = phys.p_attempt(5.0, 5.0);
    let mut f = Fabric::new(phys, 42);
    let (a, b) = ends(5.0);
    f.start_generation(HUB, 1, a, b, 0);
    let mut q = EventQueue::new();
    for (t, e) in f.take_scheduled() {
        q.push(t, e);
    }
    q.run_until(2_000_000_000, |q, s| {
        for sig in f.handle(s.event, s.time) {
            if let Signal::Herald {
                node: HUB,
                success: true,
                ..
            } = sig
            {
                f.release_qubit(QubitRef::new(A, 0));
            }
        }
        for (t, e) in f.take_scheduled() {
            q.push(t, e);
        }
    });
    let n = f.stats.attempts as f64;
    let rate = f.stats.heralds_ok as f64 / n;
    let sigma = (p * (1.0 - p) / n).sqrt();
    assert!((rate - p).abs() < 4.0 * sigma, "rate {rate} vs {p}");
}

#[test]
fn same_seed_same_signals() {
    let go = || {
        let mut f = Fabric::new(PhysicsConfig::default(), 7);
        let (a, b) = ends(5.0);
        f.start_generation(HUB, 1, a, b, 0);
        run(&mut f, 5_000_000)
    };
    assert_eq!(go(), go());
}
