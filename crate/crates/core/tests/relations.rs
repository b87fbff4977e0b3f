//! Planned searches through the public API, from input vector to relation.

use pslqe::error_control::{self, PlanRequest};
use pslqe::hyperplane::normalize_and_permute;
use pslqe::ingest::{self, Preset};
use pslqe::pslq::{find_relation, run_pslq_exact, Gamma, PslqOptions};
use pslqe::{PrecisionContext, RelationStatus};
use rug::{Integer, Rational};

fn ints(v: &[i64]) -> Vec<Integer> {
    v.iter().map(|&x| Integer::from(x)).collect()
}

fn same_up_to_sign(a: &[Integer], b: &[Integer]) -> bool {
    a == b || a.iter().zip(b).all(|(x, y)| *x == -y.clone())
}

#[test]
fn planned_search_recovers_the_first_example() {
    let ctx = PrecisionContext::new(60).unwrap();
    let values = Preset::Example1.spec().materialize(ctx).unwrap().values;
    let unit = normalize_and_permute(&values).unwrap().unit().unwrap();
    let plan = error_control::plan(&PlanRequest::new(ctx.pow10(-6), ctx.from_i64(16), 5, unit.last().clone())).unwrap();

    let work = PrecisionContext::new(plan.working_digits).unwrap();
    let values = Preset::Example1.spec().materialize(work).unwrap().values;
    let mut options = PslqOptions::new(work);
    options.gamma = Gamma::new(work.parse("1.1547006").unwrap()).unwrap();
    let eps2 = work.parse(&plan.eps2.to_string()).unwrap();
    let result = find_relation(&values, &eps2, &options).unwrap();

    assert_eq!(result.status, RelationStatus::Found);
    assert_eq!(result.iterations, 30);
    assert!(same_up_to_sign(&result.m, &ints(&[1, -5, 4, -16, 1])));
    let residual = ingest::verify_relation(&values, &result.m).unwrap();
    assert!(residual < ctx.pow10(-40));
}

#[test]
fn exact_and_floating_runs_agree_on_rational_data() {
    let text = "3/7\n5/11\n-2/13\n";
    let exact = ingest::parse_rational_vector(text).unwrap();
    let ctx = PrecisionContext::new(80).unwrap();
    let gamma = Gamma::two(ctx);
    let from_exact = run_pslq_exact(&exact, &gamma, None).unwrap();

    let floats: Vec<_> = exact.iter().map(|q: &Rational| ctx.from_rational(q)).collect();
    let from_floats = find_relation(&floats, &ctx.pow10(-60), &PslqOptions::new(ctx)).unwrap();

    assert_eq!(from_exact.status, RelationStatus::Found);
    assert_eq!(from_floats.status, RelationStatus::Found);
    assert!(same_up_to_sign(&from_exact.m, &from_floats.m));
    let dot = exact.iter().zip(&from_exact.m).fold(Rational::new(), |acc, (q, m)| acc + q.clone() * m);
    assert_eq!(dot, 0);
}

#[test]
fn a_zero_entry_is_its_own_relation() {
    let ctx = PrecisionContext::new(40).unwrap();
    let values = vec![ctx.parse("1.5").unwrap(), ctx.zero(), ctx.parse("2.25").unwrap()];
    let result = find_relation(&values, &ctx.pow10(-20), &PslqOptions::new(ctx)).unwrap();
    assert_eq!(result.status, RelationStatus::TrivialRelation);
    assert_eq!(result.iterations, 0);
    assert_eq!(result.m, ints(&[0, 1, 0]));
}
