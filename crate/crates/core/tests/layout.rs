use num_bigint::BigUint;
use proptest::prelude::*;
use qudot_core::layout::dimension::{dimension_scan, hilbert_dim_integer, hilbert_log_dim, optimal_qudit_size};
use qudot_core::layout::{build_register, Geometry, LayoutError, RegisterLayout, Scheme, SiteKind};

fn overhead(scheme: Scheme) -> f64 {
    match scheme {
        Scheme::AlwaysOn => 0.0,
        Scheme::SharedAux => 0.5,
        Scheme::AuxPerQudit => 1.0,
    }
}

// Natural-log evaluation, deliberately a different route from the library.
fn log10_dim_oracle(k: usize, d: usize, scheme: Scheme) -> f64 {
    (k as f64 / (d as f64 + overhead(scheme))) * (d as f64).ln() / std::f64::consts::LN_10
}

fn argmax_oracle(k: usize, scheme: Scheme, ds: std::ops::RangeInclusive<usize>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for d in ds {
        let v = log10_dim_oracle(k, d, scheme);
        if v > best.1 + 1e-12 {
            best = (d, v);
        }
    }
    best.0
}

#[test]
fn always_on_two_qutrits() {
    let l = build_register(Scheme::AlwaysOn, 2, 3, &Geometry::default()).unwrap();
    assert_eq!(l.sites.len(), 6);
    assert_eq!(l.electrodes.barrier.len(), 4);
    assert_eq!(l.electrodes.shift.len(), 6);
    assert_eq!(l.auxiliaries().count(), 0);
}

#[test]
fn aux_per_qudit_links_dot_one_to_its_auxiliary() {
    let l = build_register(Scheme::AuxPerQudit, 2, 3, &Geometry::default()).unwrap();
    assert_eq!(l.sites.len(), 8);
    for q in 0..2 {
        let aux = l.assigned_auxiliary(q).unwrap();
        assert_eq!(l.owners_of(aux), &[q]);
        assert!(l.electrodes.barrier_between(l.dot(q, 1), aux).is_some());
        assert!(l.electrodes.barrier_between(l.dot(q, 2), aux).is_none());
    }
}

#[test]
fn shared_aux_four_qutrits() {
    let l = build_register(Scheme::SharedAux, 4, 3, &Geometry::default()).unwrap();
    assert_eq!(l.sites.len(), 14);
    let aux: Vec<_> = l.auxiliaries().collect();
    assert_eq!(aux.len(), 2);
    match &aux[0].kind {
        SiteKind::Auxiliary { owners } => assert_eq!(owners, &vec![0, 1, 2, 3]),
        k => panic!("unexpected {k:?}"),
    }
    for a in &aux {
        assert!(l.owners_of(a.id).len() <= 4);
    }
}

#[test]
fn shared_aux_edge_ownership_is_nearest() {
    let l = build_register(Scheme::SharedAux, 6, 3, &Geometry::default()).unwrap();
    for a in l.auxiliaries() {
        let owners = l.owners_of(a.id);
        let mut by_distance: Vec<(f64, usize)> = (0..l.qudits)
            .map(|q| {
                let p = l.sites[l.dot(q, 1)].position;
                (((p[0] - a.position[0]).powi(2) + (p[1] - a.position[1]).powi(2)).sqrt(), q)
            })
            .collect();
        by_distance.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut nearest: Vec<usize> = by_distance.iter().take(owners.len()).map(|p| p.1).collect();
        nearest.sort();
        assert_eq!(owners, nearest.as_slice());
    }
}

#[test]
fn rejects_bad_parameters() {
    let g = Geometry::default();
    assert!(matches!(build_register(Scheme::SharedAux, 1, 3, &g), Err(LayoutError::InvalidParameters(_))));
    assert!(build_register(Scheme::AlwaysOn, 0, 3, &g).is_err());
    assert!(build_register(Scheme::AlwaysOn, 2, 1, &g).is_err());
    let bad = Geometry { pitch: 0.0, ..g };
    assert!(build_register(Scheme::AuxPerQudit, 2, 3, &bad).is_err());
}

#[test]
fn site_counts_match_closed_forms() {
    for scheme in Scheme::ALL {
        for n in 1..=20 {
            for d in 2..=6 {
                let Ok(l) = build_register(scheme, n, d, &Geometry::default()) else {
                    assert!(scheme == Scheme::SharedAux && n == 1);
                    continue;
                };
                let expected = match scheme {
                    Scheme::AlwaysOn => n * d,
                    Scheme::AuxPerQudit => n * (d + 1),
                    Scheme::SharedAux => n * d + n.div_ceil(2),
                };
                assert_eq!(l.sites.len(), expected, "{scheme} N={n} D={d}");
                assert_eq!(RegisterLayout::expected_site_count(scheme, n, d), expected);
                assert!(l.screening.is_symmetric());
                l.validate().unwrap();
            }
        }
    }
}

#[test]
fn log_dimension_examples() {
    let v = hilbert_log_dim(100, 3, Scheme::AlwaysOn).unwrap();
    assert!((v - log10_dim_oracle(100, 3, Scheme::AlwaysOn)).abs() < 1e-12);
    assert!((v - 15.904).abs() < 1e-3);
    let v = hilbert_log_dim(100, 3, Scheme::AuxPerQudit).unwrap();
    assert!((v - 25.0 * 3f64.log10()).abs() < 1e-12);
    assert!((v - 11.928).abs() < 1e-3);
    assert_eq!(
        hilbert_log_dim(100, 2, Scheme::AlwaysOn).unwrap(),
        hilbert_log_dim(100, 4, Scheme::AlwaysOn).unwrap()
    );
    assert!(hilbert_log_dim(0, 3, Scheme::AlwaysOn).is_err());
    assert!(hilbert_log_dim(10, 1, Scheme::AlwaysOn).is_err());
}

#[test]
fn integer_dimension_examples() {
    assert_eq!(
        hilbert_dim_integer(100, 3, Scheme::AuxPerQudit).unwrap(),
        BigUint::from(847_288_609_443u64)
    );
    assert_eq!(hilbert_dim_integer(3, 3, Scheme::AlwaysOn).unwrap(), BigUint::from(3u32));
    // Brute force over m for shared_aux.
    let m = (0..=100).filter(|&m: &usize| m * 3 + m.div_ceil(2) <= 100).max().unwrap();
    assert_eq!(m, 28);
    assert_eq!(hilbert_dim_integer(100, 3, Scheme::SharedAux).unwrap(), BigUint::from(3u32).pow(28));
}

#[test]
fn optimal_sizes() {
    for (scheme, want) in [(Scheme::AlwaysOn, 3), (Scheme::AuxPerQudit, 4), (Scheme::SharedAux, 3)] {
        let got = optimal_qudit_size(100, scheme, 2..=8).unwrap();
        assert_eq!(got.d, want, "{scheme}");
        assert_eq!(argmax_oracle(100, scheme, 2..=8), want);
    }
    // 3^(200/7) beats 4^(100/4.5).
    assert!(200.0 / 7.0 * 3f64.log10() > 100.0 / 4.5 * 4f64.log10());
}

#[test]
fn scan_rows_and_argmax() {
    let r = dimension_scan(100, 2..=10).unwrap();
    assert_eq!(r.rows.len(), 27);
    for row in &r.rows {
        let want = log10_dim_oracle(row.k, row.d, row.scheme);
        assert!((row.log10_dim - want).abs() <= 1e-12 * want.abs(), "{row:?}");
    }
    assert_eq!(r.argmax_of(Scheme::AlwaysOn), Some(3));
    assert_eq!(r.argmax_of(Scheme::SharedAux), Some(3));
    assert_eq!(r.argmax_of(Scheme::AuxPerQudit), Some(4));
    assert!(dimension_scan(0, 2..=10).is_err());
    for k in [50, 1000] {
        let s = dimension_scan(k, 2..=10).unwrap();
        for scheme in Scheme::ALL {
            assert_eq!(s.argmax_of(scheme), r.argmax_of(scheme));
        }
    }
}

proptest! {
    #[test]
    fn qutrits_win_without_full_overhead(k in 2usize..5000) {
        prop_assert_eq!(optimal_qudit_size(k, Scheme::AlwaysOn, 2..=12).unwrap().d, 3);
        prop_assert_eq!(optimal_qudit_size(k, Scheme::SharedAux, 2..=12).unwrap().d, 3);
    }

    #[test]
    fn two_and_four_tie_exactly(k in 1usize..100_000) {
        prop_assert_eq!(
            hilbert_log_dim(k, 2, Scheme::AlwaysOn).unwrap(),
            hilbert_log_dim(k, 4, Scheme::AlwaysOn).unwrap()
        );
    }

    #[test]
    fn overhead_ordering(k in 1usize..10_000, d in 2usize..20) {
        let a = hilbert_log_dim(k, d, Scheme::AlwaysOn).unwrap();
        let s = hilbert_log_dim(k, d, Scheme::SharedAux).unwrap();
        let x = hilbert_log_dim(k, d, Scheme::AuxPerQudit).unwrap();
        prop_assert!(a >= s && s >= x);
    }

    #[test]
    fn integer_never_exceeds_continuous(k in 1usize..400, d in 2usize..8, si in 0usize..3) {
        let scheme = Scheme::ALL[si];
        let exact = hilbert_dim_integer(k, d, scheme).unwrap();
        let digits = exact.to_string().len() as f64;
        let cont = hilbert_log_dim(k, d, scheme).unwrap();
        // log10 of the integer, from its leading digits.
        let lead: f64 = exact.to_string().chars().take(15).collect::<String>().parse().unwrap();
        let log_exact = lead.log10() + (digits - digits.min(15.0));
        prop_assert!(log_exact <= cont + 1e-9);
    }
}
