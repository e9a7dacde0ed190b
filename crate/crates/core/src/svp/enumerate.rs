//! Schnorr–Euchner enumeration of lattice points inside a ball.

use super::lll::Gso;

/// Enumerates integer vectors `x` with `‖Bx − t‖² ≤ radius_sq`, where the
/// lattice is described by its Gram–Schmidt data and the target `t` by its
/// projections `tau` (see [`Gso::project`]; all zeros for the origin).
///
/// Children are visited in zig-zag order around their centre, so the first
/// leaf found is the Babai point. `visit` receives each leaf and its squared
/// distance (excluding the component of `t` orthogonal to the lattice span)
/// and returns the radius to continue with, which lets callers shrink the
/// ball. Returns the number of tree nodes visited.
pub fn enumerate<F>(gso: &Gso, tau: &[f64], radius_sq: f64, exclude_zero: bool, mut visit: F) -> u64
where
    F: FnMut(&[i64], f64) -> f64,
{
    let k = gso.dim();
    assert_eq!(tau.len(), k);
    assert!(
        gso.r.iter().all(|&r| r > 0.0),
        "enumeration needs a full-rank basis"
    );
    if k == 0 {
        return 0;
    }
    let mut state = State {
        gso,
        tau,
        x: vec![0; k],
        radius_sq,
        nodes: 0,
        exclude_zero,
    };
    state.descend(k - 1, 0.0, &mut visit);
    state.nodes
}

struct State<'a> {
    gso: &'a Gso,
    tau: &'a [f64],
    x: Vec<i64>,
    radius_sq: f64,
    nodes: u64,
    exclude_zero: bool,
}

impl State<'_> {
    fn descend<F>(&mut self, level: usize, dist_above: f64, visit: &mut F)
    where
        F: FnMut(&[i64], f64) -> f64,
    {
        let k = self.x.len();
        let mut centre = self.tau[level];
        for j in level + 1..k {
            centre -= self.gso.mu[j][level] * self.x[j] as f64;
        }
        let r = self.gso.r[level];
        let start = centre.round();
        let dir = if centre >= start { 1.0 } else { -1.0 };
        let mut step = 0i64;
        loop {
            // 0, +1, −1, +2, −2, … in the direction of the centre first.
            let offset = if step == 0 {
                0.0
            } else if step % 2 == 1 {
                dir * ((step + 1) / 2) as f64
            } else {
                -dir * (step / 2) as f64
            };
            step += 1;
            let xi = start + offset;
            let y = xi - centre;
            let d = dist_above + r * y * y;
            if d > self.radius_sq {
                break;
            }
            self.nodes += 1;
            self.x[level] = xi as i64;
            if level == 0 {
                if !(self.exclude_zero && self.x.iter().all(|&v| v == 0)) {
                    self.radius_sq = visit(&self.x, d);
                }
            } else {
                self.descend(level - 1, d, visit);
            }
        }
        self.x[level] = 0;
    }
}
