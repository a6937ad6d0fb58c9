use adversim_core::corpus::{generate_corpus, TemplateWeights};
use adversim_core::identifier::dsl::{eval_expr, parse_expr, BinOp, Expr, Func};
use adversim_core::identifier::features::TTC_CAP;
use adversim_core::identifier::{identify, parse_program, Feature, FeatureVector, IdentifierMethod, ScoreProgram};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..10_000).prop_map(|v| Expr::Num(v as f64 / 100.0)),
        (0.0f64..1e6).prop_map(Expr::Num),
        prop::sample::select(Feature::ALL.to_vec()).prop_map(Expr::Var),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::bin(op, a, b)),
            (prop::sample::select(vec![Func::Exp, Func::Abs, Func::Sqrt]), inner.clone())
                .prop_map(|(f, a)| Expr::Call(f, vec![a])),
            (prop::sample::select(vec![Func::Min, Func::Max]), prop::collection::vec(inner.clone(), 1..4))
                .prop_map(|(f, a)| Expr::Call(f, a)),
            (inner.clone(), inner.clone(), inner).prop_map(|(a, b, c)| Expr::Call(Func::Clip, vec![a, b, c])),
        ]
    })
}

fn feature_vector() -> impl Strategy<Value = FeatureVector> {
    (
        (0.0f64..500.0, 0.0f64..500.0, 0.0f64..60.0, -60.0f64..60.0, 0.001f64..TTC_CAP),
        (-1.0f64..=1.0, -200.0f64..200.0, -200.0f64..200.0, 0.0f64..40.0, prop::bool::ANY),
    )
        .prop_map(|((dist, min_dist, rel_speed, closing_speed, ttc), (ha, lat, ahead, speed, cross))| FeatureVector {
            dist,
            min_dist,
            rel_speed,
            closing_speed,
            ttc,
            heading_align: ha,
            lateral_offset: lat,
            ahead,
            speed,
            path_cross: if cross { 1.0 } else { 0.0 },
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn print_parse_round_trip(e in expr()) {
        let printed = e.to_string();
        let back = parse_expr(&printed).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn hash_ignores_literal_values(e in expr(), bump in 0.5f64..3.0) {
        let p = ScoreProgram::from_ast(e.clone());
        let q = ScoreProgram::from_ast(e.map_literals(&mut |v| v * bump + 1.0));
        prop_assert_eq!(p.structure_hash, q.structure_hash);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn evaluation_is_total(e in expr(), fvs in prop::collection::vec(feature_vector(), 50)) {
        for fv in &fvs {
            prop_assert!(eval_expr(&e, fv).is_finite());
        }
    }
}

#[test]
fn hash_changes_with_operators_and_identifiers() {
    let base = parse_program("2*dist + exp(-ttc)").unwrap();
    for other in ["2*dist - exp(-ttc)", "2*speed + exp(-ttc)", "2/dist + exp(-ttc)", "2*dist + abs(-ttc)", "2*dist + exp(ttc)"] {
        assert_ne!(base.structure_hash, parse_program(other).unwrap().structure_hash, "{other}");
    }
}

#[test]
fn affine_transform_keeps_selection() {
    let set = generate_corpus(11, 50, &TemplateWeights::uniform()).unwrap();
    let programs = ["dist", "1/max(ttc, 0.5) + 0.1*path_cross", "-dist + 0.3*closing_speed", "exp(-dist/20)*(1 + heading_align)"];
    for src in programs {
        let p = parse_program(src).unwrap();
        let scaled = parse_program(&format!("2*({src}) + 10")).unwrap();
        let shifted = parse_program(&format!("0.5*({src}) - 3")).unwrap();
        for s in &set.scenarios {
            let n = s.background.len().min(3);
            let base = identify(s, &IdentifierMethod::Program(p.clone()), n).unwrap();
            assert_eq!(base, identify(s, &IdentifierMethod::Program(scaled.clone()), n).unwrap(), "{src} on {}", s.id);
            assert_eq!(base, identify(s, &IdentifierMethod::Program(shifted.clone()), n).unwrap(), "{src} on {}", s.id);
        }
    }
}
