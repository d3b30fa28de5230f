//! Export to the CPLEX LP text format, for inspecting relaxations with
//! external solvers.

use std::fmt::Write;

use super::{Comparator, LinearProgram, Sense};

fn var_name(lp: &LinearProgram, j: usize) -> String {
    let name = &lp.variables()[j].name;
    let ok = !name.is_empty()
        && name.len() <= 255
        && !name.starts_with(|c: char| c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "_[]().".contains(c));
    if ok {
        name.clone()
    } else {
        format!("x{j}")
    }
}

fn term(out: &mut String, first: bool, coeff: f64, name: &str) {
    let sign = if coeff < 0.0 { '-' } else { '+' };
    if first && sign == '+' {
        let _ = write!(out, " {:e} {name}", coeff.abs());
    } else {
        let _ = write!(out, " {sign} {:e} {name}", coeff.abs());
    }
}

/// Renders the program in LP format (objective, constraints, bounds).
pub fn to_lp_string(lp: &LinearProgram) -> String {
    let names: Vec<String> = (0..lp.num_vars()).map(|j| var_name(lp, j)).collect();
    let mut out = String::new();
    out.push_str(match lp.sense() {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    let mut first = true;
    for (j, &c) in lp.objective().iter().enumerate() {
        if c != 0.0 {
            term(&mut out, first, c, &names[j]);
            first = false;
        }
    }
    if first {
        // an all-zero objective still needs one term
        if let Some(n) = names.first() {
            let _ = write!(out, " 0 {n}");
        }
    }
    out.push_str("\nSubject To\n");
    for (i, r) in lp.constraints().iter().enumerate() {
        let _ = write!(out, " c{i}:");
        if r.coeffs.is_empty() {
            let _ = write!(out, " 0 {}", names.first().map(String::as_str).unwrap_or("x0"));
        }
        for (k, &(j, a)) in r.coeffs.iter().enumerate() {
            term(&mut out, k == 0, a, &names[j]);
        }
        let op = match r.cmp {
            Comparator::Le => "<=",
            Comparator::Eq => "=",
            Comparator::Ge => ">=",
        };
        let _ = writeln!(out, " {op} {:e}", r.rhs);
    }
    out.push_str("Bounds\n");
    for (j, v) in lp.variables().iter().enumerate() {
        let n = &names[j];
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {n} free");
            }
            (true, true) => {
                let _ = writeln!(out, " {:e} <= {n} <= {:e}", v.lower, v.upper);
            }
            (true, false) => {
                let _ = writeln!(out, " {n} >= {:e}", v.lower);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {n} <= {:e}", v.upper);
            }
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_sections() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        lp.add_variable("h[1]", 0.0, 1.0).unwrap();
        lp.add_variable("9bad", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        lp.set_objective(&[2.0, -1.0]).unwrap();
        lp.add_constraint(&[1.0, 1.0], Comparator::Le, 3.0).unwrap();
        let s = to_lp_string(&lp);
        assert_eq!(
            s,
            "Maximize\n obj: 2e0 h[1] - 1e0 x1\nSubject To\n c0: 1e0 h[1] + 1e0 x1 <= 3e0\n\
             Bounds\n 0e0 <= h[1] <= 1e0\n x1 free\nEnd\n"
        );
    }
}
