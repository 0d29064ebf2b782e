//! Closed-form inverse kinematics of a planar two-link arm, used as a test
//! oracle for the numerical solver.

use std::f64::consts::PI;

use super::JointConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Planar2rSolutions {
    pub solutions: Vec<JointConfig>,
    /// Set when the target admits infinitely many solutions (target at the
    /// shoulder of an arm with equal links); `solutions` then holds two
    /// representatives.
    pub degenerate: bool,
}

fn wrap(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Joint solutions `(q1, q2)` placing the tip of a planar arm with link
/// lengths `l1`, `l2` at `target_xy`, with angles in `(-pi, pi]`.
pub fn analytic_ik_2r(l1: f64, l2: f64, target_xy: [f64; 2]) -> Planar2rSolutions {
    const EPS: f64 = 1e-12;
    let [x, y] = target_xy;
    let r2 = x * x + y * y;
    let c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if c2 > 1.0 + EPS || c2 < -1.0 - EPS {
        return Planar2rSolutions {
            solutions: Vec::new(),
            degenerate: false,
        };
    }
    if r2.sqrt() < EPS && (l1 - l2).abs() < EPS {
        return Planar2rSolutions {
            solutions: vec![
                JointConfig::new(vec![0.0, PI]),
                JointConfig::new(vec![0.0, -PI]),
            ],
            degenerate: true,
        };
    }
    let c2 = c2.clamp(-1.0, 1.0);
    let elbow = c2.acos();
    let q2s: Vec<f64> = if elbow < 1e-9 || PI - elbow < 1e-9 {
        vec![elbow]
    } else {
        vec![elbow, -elbow]
    };
    let solutions = q2s
        .into_iter()
        .map(|q2| {
            let q1 = y.atan2(x) - (l2 * q2.sin()).atan2(l1 + l2 * q2.cos());
            JointConfig::new(vec![wrap(q1), q2])
        })
        .collect();
    Planar2rSolutions {
        solutions,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn tip(l1: f64, l2: f64, q: &[f64]) -> [f64; 2] {
        [
            l1 * q[0].cos() + l2 * (q[0] + q[1]).cos(),
            l1 * q[0].sin() + l2 * (q[0] + q[1]).sin(),
        ]
    }

    #[test]
    fn fully_extended() {
        let s = analytic_ik_2r(1.0, 1.0, [2.0, 0.0]);
        assert_eq!(s.solutions, vec![JointConfig::new(vec![0.0, 0.0])]);
        assert!(!s.degenerate);
    }

    #[test]
    fn shoulder_target_is_degenerate() {
        let s = analytic_ik_2r(1.0, 1.0, [0.0, 0.0]);
        assert!(s.degenerate);
        let q2: Vec<f64> = s.solutions.iter().map(|q| q[1]).collect();
        assert_eq!(q2, vec![PI, -PI]);
    }

    #[test]
    fn law_of_cosines_hand_check() {
        let s = analytic_ik_2r(1.0, 1.0, [1.0, 1.0]);
        assert_eq!(s.solutions.len(), 2);
        // elbow +90: q1 = atan2(1,1) - atan2(1,1) = 0
        assert!((s.solutions[0][0] - 0.0).abs() < 1e-12);
        assert!((s.solutions[0][1] - FRAC_PI_2).abs() < 1e-12);
        // elbow -90: q1 = pi/4 + pi/4
        assert!((s.solutions[1][0] - FRAC_PI_2).abs() < 1e-12);
        assert!((s.solutions[1][1] + FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn unreachable_is_empty() {
        assert!(analytic_ik_2r(1.0, 1.0, [2.5, 0.0]).solutions.is_empty());
        // inside the inner hole of an unequal arm
        assert!(analytic_ik_2r(1.0, 0.4, [0.3, 0.0]).solutions.is_empty());
    }

    #[test]
    fn solutions_reproduce_target() {
        for (x, y) in [(1.2, 0.5), (-0.3, 1.4), (0.1, -0.2), (-1.9, 0.05)] {
            let s = analytic_ik_2r(1.0, 1.0, [x, y]);
            assert_eq!(s.solutions.len(), 2);
            for q in &s.solutions {
                let t = tip(1.0, 1.0, q);
                assert!((t[0] - x).abs() < 1e-12 && (t[1] - y).abs() < 1e-12);
            }
        }
    }
}
