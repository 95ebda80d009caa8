use porcupine::fiber::{select_fiber_map, Branch, FiberSystem};
use porcupine::kv::KvDocument;
use porcupine::schedule::{build_schedule, Schedule};
use porcupine::transitions::{build_graphs, certify_transition, envelope_scan, grid, locate_kink, solvers};
use porcupine::{Config, Word};

#[test]
fn one_piece_schedule_has_no_windows() {
    let c = Config::default();
    let s = build_schedule(1, &c.params, &c.limits).unwrap();
    assert_eq!(s.pieces.len(), 1);
    assert!(s.windows.is_empty());
    assert!(s.threshold_met());
    assert!(s.is_valid());
}

#[test]
fn two_piece_schedule_round_trip_and_kink() {
    let c = Config::default();
    let s = build_schedule(2, &c.params, &c.limits).unwrap();
    assert!(s.is_valid(), "{:?}", s.violations());

    let text = s.to_document().render();
    let back = Schedule::from_document(&KvDocument::parse(&text).unwrap()).unwrap();
    assert_eq!(back, s);

    let graphs = build_graphs(&s, c.limits.node_cap).unwrap();
    let mut solvers = solvers(&s, &graphs, c.limits.solver);
    let root = locate_kink(1, &s, &mut solvers).unwrap();
    let w = s.tau_window(1);
    assert!(w.minus <= root.t && root.t <= w.plus);
    let cert = certify_transition(1, &s, &mut solvers, &root).unwrap();
    assert!(cert.passed(), "{:?}", cert.failures);

    let curve = envelope_scan(&mut solvers, &grid(w.minus - 2.0, 0.0, 0.05).unwrap(), false).unwrap();
    assert_eq!(curve.active_changes(), 1);
    let (a, b) = curve.change_cells()[0];
    assert!(a <= root.t && root.t <= b);
    assert!(curve.min_second_difference() >= -1e-12);

    // Constant windows: 2s fit piece 1, 0s fit no piece.
    let len = s.pieces.iter().map(|p| p.zeros.len).max().unwrap() + 1;
    let fs = FiberSystem::new(c.params, c.fiber).unwrap();
    let twos = Word::repeat(2, len);
    let zeros = Word::repeat(0, len);
    assert_eq!(select_fiber_map(&twos, &s).unwrap().branch, Branch::Plain);
    assert_eq!(select_fiber_map(&zeros, &s).unwrap().branch, Branch::Tilde);
    assert!(fs.climb_bound() > 0);
}

#[test]
fn config_file_drives_fiber_system() {
    let c = Config::parse("fiber.b = 0.04\nsampling.seed = 9\n").unwrap();
    let fs = FiberSystem::new(c.params, c.fiber).unwrap();
    assert_eq!(fs.b(), 0.04);
    assert_eq!(c.sampling.seed, 9);
    let bad = Config::parse("params.beta2 = 2.0\n").unwrap();
    assert!(bad.params.validate().is_err());
}
