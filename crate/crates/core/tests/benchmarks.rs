use stochsep::benchmarks::{create, names};

#[test]
fn runs_are_reproducible_through_the_registry() {
    for &name in names() {
        let b = create(name).unwrap();
        let mut s = b.default_settings();
        s.m = 8;
        s.n = 300;
        s.mesh_nodes = 127;
        s.seed = 5;
        let (x, y) = (b.run(&s).unwrap(), b.run(&s).unwrap());
        assert_eq!(x.probe_values, y.probe_values, "{name}");
        assert_eq!(x.solution.history_csv(), y.solution.history_csv(), "{name}");
        s.seed = 6;
        assert_ne!(b.run(&s).unwrap().probe_values, x.probe_values, "{name}");
    }
}

#[test]
fn burgers_errors_barely_depend_on_the_dimension() {
    let b = create("burgers").unwrap();
    let runs: Vec<Vec<f64>> = [1000, 2000, 3000]
        .into_iter()
        .map(|m| {
            let mut s = b.default_settings();
            s.m = m;
            s.n = 10_000;
            let r = b.run(&s).unwrap();
            assert!(r.converged);
            r.solution.history.iter().map(|h| h.eps_global).collect()
        })
        .collect();
    // the path above the stopping tolerance; the crossing entry itself is noisier
    let eps1 = b.default_settings().eps_global;
    for other in &runs[1..] {
        assert_eq!(runs[0].len(), other.len(), "{:?} vs {:?}", runs[0], other);
        assert!(other.last().unwrap() <= &eps1);
        for (a, b) in runs[0].iter().zip(other).filter(|(a, _)| **a > eps1) {
            assert!((a - b).abs() < 0.15 * a, "{:?} vs {:?}", runs[0], other);
        }
    }
}
