//! OBJ export of the glued surface, the plane `P` and the segment.

use std::fmt::Write as _;

use super::potentials::Potential;
use crate::error::Result;

/// Triangulated slice `x2 = 0` of `Sigma` and of `P`, drawn in the
/// coordinates `(x1, x3, y1)`, plus the segment as a polyline.
pub fn slice_obj(pot: &dyn Potential, r: f64, x3_lo: f64, x3_hi: f64, n: usize) -> Result<String> {
    let n = n.max(2);
    let mut out = String::from("# glued surface, plane and segment; coordinates (x1, x3, y1)\n");
    let patch = |out: &mut String, base: usize, f: &dyn Fn(f64, f64) -> Result<[f64; 3]>| -> Result<usize> {
        for i in 0..n {
            for k in 0..n {
                let a = -r + 2.0 * r * i as f64 / (n - 1) as f64;
                let t = x3_lo + (x3_hi - x3_lo) * k as f64 / (n - 1) as f64;
                let v = f(a, t)?;
                let _ = writeln!(out, "v {:.12e} {:.12e} {:.12e}", v[0], v[1], v[2]);
            }
        }
        for i in 0..n - 1 {
            for k in 0..n - 1 {
                let v = |i: usize, k: usize| base + i * n + k + 1;
                let _ = writeln!(out, "f {} {} {}", v(i, k), v(i + 1, k), v(i + 1, k + 1));
                let _ = writeln!(out, "f {} {} {}", v(i, k), v(i + 1, k + 1), v(i, k + 1));
            }
        }
        Ok(base + n * n)
    };
    let _ = writeln!(out, "o sigma");
    let base = patch(&mut out, 0, &|a, t| Ok([a, t, pot.derivs(&[a, 0.0, t])?.grad[0]]))?;
    let _ = writeln!(out, "o plane");
    let base = patch(&mut out, base, &|a, t| Ok([0.0, t, a]))?;
    let _ = writeln!(out, "o segment");
    for k in 0..n {
        let t = x3_lo + (x3_hi - x3_lo) * k as f64 / (n - 1) as f64;
        let _ = writeln!(out, "v 0 {t:.12e} 0");
    }
    let idx: Vec<String> = (0..n).map(|k| (base + k + 1).to_string()).collect();
    let _ = writeln!(out, "l {}", idx.join(" "));
    Ok(out)
}
