//! Feasibility, entailment, projection and integer witnesses over linear
//! constraints.

use std::collections::BTreeSet;

use minicpa::solver::{integer_witness, Conjunction, Feasibility, IntBox, LinearConstraint, LinearTerm, Solver};

fn show(c: &Conjunction) -> String {
    let parts: Vec<String> = c.iter().map(LinearConstraint::display_text).collect();
    format!("{{{}}}", parts.join(", "))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let solver = Solver::default();

    // x0 = 0, x1 = x0 + 1, x1 = 0
    let path = Conjunction::from_constraints([
        LinearConstraint::eq(LinearTerm::var("x0")),
        LinearConstraint::eq(LinearTerm::from_parts([("x1", 1), ("x0", -1)], -1)),
        LinearConstraint::eq(LinearTerm::var("x1")),
    ]);
    println!("{} -> {:?}", show(&path), solver.is_feasible(&path)?);

    // 2y = 1 has a rational model only
    let parity = Conjunction::from_constraints([LinearConstraint::eq(LinearTerm::from_parts([("y", 2)], -1))]);
    match solver.is_feasible(&parity)? {
        Feasibility::Feasible(m) => {
            let vals: Vec<String> = m.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            println!("{} -> rational model {}", show(&parity), vals.join(", "));
        }
        other => println!("{} -> {other:?}", show(&parity)),
    }
    let mut around = IntBox::new();
    around.insert("y".into(), ((-16).into(), 16.into()));
    println!("integer witness in [-16, 16]: {:?}", integer_witness(&parity, &around)?);

    // a <= b, b <= 3 entails a <= 3
    let chain = Conjunction::from_constraints([
        LinearConstraint::le(LinearTerm::from_parts([("a", 1), ("b", -1)], 0)),
        LinearConstraint::le(LinearTerm::from_parts([("b", 1)], -3)),
    ]);
    let goal = LinearConstraint::le(LinearTerm::from_parts([("a", 1)], -3));
    println!("{} entails {}: {}", show(&chain), goal.display_text(), solver.entails(&chain, &goal));

    let keep: BTreeSet<String> = ["a".to_string()].into();
    if let Some(p) = solver.project(&chain, &keep)? {
        println!("projected onto a: {}", show(&p));
    }
    Ok(())
}
