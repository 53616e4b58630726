//! Randomized structure checks: expression round-trips, hit-set invariants,
//! operator affinity, and positive homogeneity of the certified scaling sup.

use irb::certify::{certify_bounded, CertKind};
use irb::cli::scenario::{dump, parse_config};
use irb::expr::{self, Builtin, Expr, Var};
use irb::family::{Homotopy, MapFamily};
use irb::hit::hit_times;
use irb::operator::{apply_irb, GridFunction, OperatorSpec, Param, Space};
use proptest::prelude::*;

// --- expression generator ---------------------------------------------------
//
// Only parser-reachable shapes: constants are non-negative and finite (the
// parser produces negative values through Neg), argument counts match the
// builtin arities.

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..4096).prop_map(|n| Expr::Const(n as f64 / 128.0)),
        Just(Expr::Var(Var::T)),
        Just(Expr::Var(Var::X)),
    ]
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 3, |inner| {
        let bin = (
            prop_oneof![
                Just(expr::BinOp::Add),
                Just(expr::BinOp::Sub),
                Just(expr::BinOp::Mul),
                Just(expr::BinOp::Div),
                Just(expr::BinOp::Pow),
            ],
            inner.clone(),
            inner.clone(),
        )
            .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b)));
        let unary = prop_oneof![
            Just(Builtin::Floor),
            Just(Builtin::Abs),
            Just(Builtin::Sqrt),
            Just(Builtin::Exp),
            Just(Builtin::Ln),
            Just(Builtin::Sin),
            Just(Builtin::Cos),
        ];
        let binary = prop_oneof![
            Just(Builtin::Min),
            Just(Builtin::Max),
            Just(Builtin::Ge),
            Just(Builtin::Gt),
            Just(Builtin::Le),
            Just(Builtin::Lt),
        ];
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            bin,
            (unary, inner.clone()).prop_map(|(f, a)| Expr::Call(f, vec![a])),
            (binary, inner.clone(), inner.clone())
                .prop_map(|(f, a, b)| Expr::Call(f, vec![a, b])),
            (inner.clone(), inner.clone(), inner)
                .prop_map(|(a, b, c)| Expr::Call(Builtin::Clamp, vec![a, b, c])),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn expr_pretty_print_round_trips(e in arb_expr()) {
        let text = expr::pretty(&e);
        let back = expr::parse(&text)
            .unwrap_or_else(|err| panic!("reparse of `{text}` failed: {err}"));
        prop_assert_eq!(&back, &e, "round-trip changed `{}`", text);
        // identical trees evaluate identically; spot-check the Ok path
        for (t, x) in [(1.0, 0.25), (1.75, 0.875)] {
            match (expr::eval(&e, t, x), expr::eval(&back, t, x)) {
                (Ok(a), Ok(b)) => prop_assert!(a == b || (a.is_nan() && b.is_nan())),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "eval disagreement: {a:?} vs {b:?}"),
            }
        }
    }
}

// --- hit sets ----------------------------------------------------------------

fn family_pool() -> Vec<MapFamily> {
    let two = || {
        vec![
            expr::parse("x/2").unwrap(),
            expr::parse("x/2 + 1/2").unwrap(),
        ]
    };
    vec![
        MapFamily::extend(two(), Homotopy::Identity, 0.0, 1.0).unwrap(),
        MapFamily::extend(two(), Homotopy::Step(0.5), 0.0, 1.0).unwrap(),
        MapFamily::extend(two(), Homotopy::Ramp(8), 0.0, 1.0).unwrap(),
        MapFamily::extend(
            vec![
                expr::parse("x/2").unwrap(),
                expr::parse("1 - x^2/2").unwrap(),
            ],
            Homotopy::Identity,
            0.0,
            1.0,
        )
        .unwrap(),
        MapFamily::direct(expr::parse("x").unwrap(), 2, 0.0, 1.0).unwrap(),
        MapFamily::direct(expr::parse("x/2").unwrap(), 2, 0.0, 1.0).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn hit_sets_are_sorted_disjoint_consistent(
        fam_idx in 0usize..6,
        x in 0.0f64..=1.0,
        nt_pow in 3u32..=8,
    ) {
        let fams = family_pool();
        let fam = &fams[fam_idx];
        let n_t = 1usize << nt_pow;
        let hs = hit_times(fam, x, n_t);
        let n = fam.n() as f64;

        let mut total = 0.0;
        let mut prev_hi = f64::NEG_INFINITY;
        for &(lo, hi) in &hs.intervals {
            prop_assert!(lo <= hi + 1e-12);
            prop_assert!(lo >= prev_hi - 1e-12, "overlapping or unsorted intervals");
            prop_assert!(lo >= 1.0 - 1e-9 && hi <= n + 1e-9);
            total += hi - lo;
            prev_hi = hi;
        }
        prop_assert!((hs.measure - total).abs() <= 1e-9);
        prop_assert!(hs.measure >= 0.0 && hs.measure <= n - 1.0 + 1e-9);

        // membership holds at midpoints of broad intervals and fails at
        // midpoints of broad monotone gaps
        let contains = |t: f64| -> Option<bool> {
            if !fam.classify(t).is_monotone() {
                return None;
            }
            let (lo, hi) = fam.image_interval(t).ok()?;
            Some(x >= lo - 1e-9 && x <= hi + 1e-9)
        };
        for &(lo, hi) in &hs.intervals {
            if hi - lo > 1e-6 {
                prop_assert_eq!(
                    contains(0.5 * (lo + hi)),
                    Some(true),
                    "interval midpoint not a member"
                );
            }
        }
        let mut edges = vec![1.0];
        for &(lo, hi) in &hs.intervals {
            edges.push(lo);
            edges.push(hi);
        }
        edges.push(n);
        for gap in edges.chunks(2) {
            if let [g_lo, g_hi] = *gap {
                if g_hi - g_lo > 1e-6 {
                    let mid = 0.5 * (g_lo + g_hi);
                    if let Some(m) = contains(mid) {
                        prop_assert!(!m, "gap midpoint t = {mid} is a member");
                    }
                }
            }
        }
    }
}

// --- operator affinity --------------------------------------------------------

fn small_spec() -> OperatorSpec {
    let fam = MapFamily::extend(
        vec![
            expr::parse("x/2").unwrap(),
            expr::parse("x/2 + 1/2").unwrap(),
        ],
        Homotopy::Identity,
        0.0,
        1.0,
    )
    .unwrap();
    OperatorSpec {
        fam,
        q: Param::Formula(expr::parse("ge(x, 2 - t)").unwrap()),
        s: Param::Formula(expr::parse("1/2*x*(t - 1)").unwrap()),
        n_t: 64,
        inv_tol: 1e-12,
        delta: 0.0,
        n_x: 129,
        space: Space::Sup,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_is_affine_to_rounding(
        fv in proptest::collection::vec(-1.0f64..=1.0, 129),
        gv in proptest::collection::vec(-1.0f64..=1.0, 129),
        alpha in 0.0f64..=1.0,
    ) {
        let spec = small_spec();
        let f = GridFunction::new(0.0, 1.0, fv).unwrap();
        let g = GridFunction::new(0.0, 1.0, gv).unwrap();
        let mixed = f.lin_comb(alpha, 1.0 - alpha, &g).unwrap();
        let lhs = apply_irb(&spec, &mixed).unwrap();
        let rhs = apply_irb(&spec, &f)
            .unwrap()
            .lin_comb(alpha, 1.0 - alpha, &apply_irb(&spec, &g).unwrap())
            .unwrap();
        let d = lhs.dist(&rhs, Space::Sup).unwrap();
        prop_assert!(d <= 1e-12, "affinity violated by {d:.3e}");
    }
}

// --- scaling sup homogeneity ----------------------------------------------------

fn scaling_spec(s: Expr) -> OperatorSpec {
    let fam = MapFamily::direct(expr::parse("x").unwrap(), 2, 0.0, 1.0).unwrap();
    OperatorSpec {
        fam,
        q: Param::Formula(expr::parse("0").unwrap()),
        s: Param::Formula(s),
        n_t: 64,
        inv_tol: 1e-12,
        delta: 0.0,
        n_x: 65,
        space: Space::Sup,
    }
}

fn cert_s(spec: &OperatorSpec) -> f64 {
    match certify_bounded(spec, 64, 65).unwrap().kind {
        CertKind::Bounded { s, .. } => s,
        _ => unreachable!("bounded certificate"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_sup_is_positively_homogeneous(
        s_idx in 0usize..5,
        c_num in 1u32..=256,
    ) {
        let pool = ["x", "1/2*x*(t - 1)", "sin(x) + 1", "x^2", "exp(x/4)"];
        let s = expr::parse(pool[s_idx]).unwrap();
        let c = c_num as f64 / 64.0;
        let scaled = Expr::Bin(
            expr::BinOp::Mul,
            Box::new(Expr::Const(c)),
            Box::new(s.clone()),
        );
        let base = cert_s(&scaling_spec(s));
        let after = cert_s(&scaling_spec(scaled));
        prop_assert_eq!(after, c * base, "sup not scaled exactly: {} vs {}", after, c * base);
    }
}

// identity family has hit measure exactly 1, so the criterion equals S and
// scaling walks it across the strict pass boundary
#[test]
fn scaling_flips_pass_at_criterion_one() {
    let at = |text: &str| {
        let cert = certify_bounded(&scaling_spec(expr::parse(text).unwrap()), 64, 65).unwrap();
        (cert.criterion, cert.pass)
    };
    let (crit, pass) = at("1");
    assert_eq!(crit, 1.0);
    assert!(!pass, "criterion exactly 1 must fail strictly");
    let (crit, pass) = at("0.875*1");
    assert_eq!(crit, 0.875);
    assert!(pass);
    let (crit, pass) = at("1.25*1");
    assert_eq!(crit, 1.25);
    assert!(!pass);
}

// --- scenario config round-trip ---------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scenario_dump_round_trips(
        a_num in -8i32..8,
        len_num in 1u32..=8,
        n_x in 2usize..200,
        nt_mult in 1usize..6,
        kmax in 1usize..100,
        tol_num in 1u32..=1000,
        use_bases in proptest::bool::ANY,
        use_lp in proptest::bool::ANY,
        f0_idx in 0usize..3,
    ) {
        let a = a_num as f64 / 4.0;
        let b = a + len_num as f64 / 2.0;
        let nt = 2 * nt_mult;
        let tol = tol_num as f64 / 1e6;
        let maps = if use_bases {
            "base1 = x/2\nbase2 = x/2 + 1/2\nhomotopy = ramp 6"
        } else {
            "expr = x/2"
        };
        let n_line = if use_bases { String::new() } else { "n = 2\n".to_string() };
        let space = if use_lp { "lp 2" } else { "sup" };
        let f0 = ["zero", "one", "expr x/2"][f0_idx];
        let text = format!(
            "[domain]\na = {a}\nb = {b}\nnx = {n_x}\n\n[time]\n{n_line}nt = {nt}\n\n\
             [maps]\n{maps}\n\n[q]\nexpr = x - {a}\n\n[s]\nexpr = 1/4\n\n\
             [run]\nspace = {space}\ntol = {tol}\nkmax = {kmax}\nf0 = {f0}\n"
        );
        let sc = parse_config(&text, "prop").unwrap_or_else(|e| panic!("parse failed: {e}\n{text}"));
        let again = parse_config(&dump(&sc), "prop")
            .unwrap_or_else(|e| panic!("re-parse of dump failed: {e}\n{}", dump(&sc)));
        prop_assert_eq!(again, sc);
    }
}
