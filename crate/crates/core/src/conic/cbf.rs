//! Debug dump in the Conic Benchmark Format (CBF, version 3).
//!
//! Every constraint is written as a block of scalar rows `A x + b ∈ K`
//! with cones `L=`, `L+`, `Q`, `@k:POW` and `SVECPSD`. CBF orders a
//! `SVECPSD` block as the lower triangle in column-major order, so PSD
//! rows are permuted on the way out; the √2 scaling is shared.

use std::io::Write;

use super::{triangle_index, Cone, ConicProblem};

pub fn write_cbf(p: &ConicProblem, out: &mut impl Write) -> std::io::Result<()> {
    let n = p.n_vars();
    writeln!(out, "VER\n3\n")?;
    writeln!(out, "OBJSENSE\nMIN\n")?;
    writeln!(out, "VAR\n{n} 1\nF {n}\n")?;

    let alphas: Vec<f64> = p
        .constraints
        .iter()
        .filter_map(|c| match c.cone {
            Cone::Power3 { alpha } => Some(alpha),
            _ => None,
        })
        .collect();
    if !alphas.is_empty() {
        writeln!(out, "POWCONES\n{} {}", alphas.len(), 2 * alphas.len())?;
        for a in &alphas {
            writeln!(out, "2\n{a:.17e}\n{:.17e}", 1.0 - a)?;
        }
        writeln!(out)?;
    }

    // Rows in CBF order: per constraint, the indices into `rows`.
    let mut order: Vec<(usize, Vec<usize>)> = Vec::with_capacity(p.constraints.len());
    for (k, c) in p.constraints.iter().enumerate() {
        let idx = match c.cone {
            Cone::Psd { dim } => {
                let mut v = Vec::with_capacity(c.len());
                for col in 0..dim {
                    for row in col..dim {
                        v.push(triangle_index(col, row));
                    }
                }
                v
            }
            _ => (0..c.len()).collect(),
        };
        order.push((k, idx));
    }

    let m = p.n_rows();
    writeln!(out, "CON\n{m} {}", p.constraints.len())?;
    let mut pow = 0;
    for c in &p.constraints {
        match c.cone {
            Cone::Zero => writeln!(out, "L= {}", c.len())?,
            Cone::Nonnegative => writeln!(out, "L+ {}", c.len())?,
            Cone::SecondOrder => writeln!(out, "Q {}", c.len())?,
            Cone::Power3 { .. } => {
                writeln!(out, "@{pow}:POW 3")?;
                pow += 1;
            }
            Cone::Psd { .. } => writeln!(out, "SVECPSD {}", c.len())?,
        }
    }
    writeln!(out)?;

    let obj: Vec<(usize, f64)> = p.objective.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
    writeln!(out, "OBJACOORD\n{}", obj.len())?;
    for (j, v) in obj {
        writeln!(out, "{j} {v:.17e}")?;
    }
    writeln!(out)?;

    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut row = 0;
    for (k, idx) in &order {
        for &i in idx {
            let e = &p.constraints[*k].rows[i];
            for &(j, v) in &e.terms {
                if v != 0.0 {
                    a.push((row, j, v));
                }
            }
            if e.constant != 0.0 {
                b.push((row, e.constant));
            }
            row += 1;
        }
    }
    writeln!(out, "ACOORD\n{}", a.len())?;
    for (i, j, v) in a {
        writeln!(out, "{i} {j} {v:.17e}")?;
    }
    writeln!(out)?;
    writeln!(out, "BCOORD\n{}", b.len())?;
    for (i, v) in b {
        writeln!(out, "{i} {v:.17e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{cubic_power_constraint, ConeConstraint, LinExpr};

    #[test]
    fn dump_lists_every_cone() {
        let mut p = ConicProblem::new();
        let x = p.add_vars("x", 3);
        p.objective[x] = 1.0;
        p.add(ConeConstraint::zero(vec![LinExpr::var(x).add_constant(-1.0)]));
        p.add_all(cubic_power_constraint(LinExpr::var(x + 1), LinExpr::var(x + 2), 2.0));
        p.add(ConeConstraint::psd(2, |r, c| LinExpr::var(x + triangle_index(r, c))));
        let mut buf = Vec::new();
        write_cbf(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for needle in ["VER\n3", "L= 1", "@0:POW 3", "L+ 1", "SVECPSD 3", "POWCONES\n1 2", "ACOORD", "BCOORD"] {
            assert!(text.contains(needle), "missing {needle:?} in\n{text}");
        }
    }
}
