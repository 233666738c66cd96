//! Problem instances: a complete graph with edge distances and node weights,
//! the number of classes `k`, the class weight window `[wl, wu]` and a set of
//! pairs that may not share a class.
//!
//! # File format
//!
//! Instances are stored as TOML documents with exactly these keys:
//!
//! | key           | type              | notes                                          |
//! |---------------|-------------------|------------------------------------------------|
//! | `n`           | integer           | node count, dummies included                   |
//! | `k`           | integer           | number of classes                              |
//! | `wl`, `wu`    | float             | class weight window                            |
//! | `weights`     | float array       | length `n`                                     |
//! | `coords`      | array of `[x, y]` | Euclidean distances are derived from these     |
//! | `dist`        | float array       | strict lower triangle, row-major: `d(1,0), d(2,0), d(2,1), d(3,0), ...` |
//! | `forbidden`   | array of `[i, j]` | optional, pairs that must be in different classes |
//! | `dummy_count` | integer           | optional, trailing dummy nodes (default 0)     |
//!
//! Exactly one of `coords` and `dist` must be present. Unknown keys are
//! rejected.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Slack used when rounding weight ratios in the necessary feasibility test.
const RATIO_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    n: usize,
    k: usize,
    weights: Vec<f64>,
    dist: Vec<f64>,
    coords: Option<Vec<[f64; 2]>>,
    forbidden: BTreeSet<(usize, usize)>,
    wl: f64,
    wu: f64,
    dummy_count: usize,
}

/// Class sizes of a balanced partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeBounds {
    /// `floor(n / k)`
    pub fl: usize,
    /// `ceil(n / k)`
    pub fu: usize,
    /// `n mod k`, the number of classes of size `fu` when `fu > fl`.
    pub r: usize,
    /// Number of intra-class edges in every balanced partition.
    pub beta: usize,
}

impl SizeBounds {
    pub fn new(n: usize, k: usize) -> SizeBounds {
        let fl = n / k;
        let r = n % k;
        let fu = if r == 0 { fl } else { fl + 1 };
        let beta = r * fu * fu.saturating_sub(1) / 2 + (k - r) * fl * fl.saturating_sub(1) / 2;
        SizeBounds { fl, fu, r, beta }
    }
}

fn normalize_pair(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl Instance {
    /// Builds an instance from a full `n x n` row-major distance matrix.
    pub fn new(
        k: usize,
        weights: Vec<f64>,
        dist: Vec<f64>,
        wl: f64,
        wu: f64,
        forbidden: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Instance> {
        let n = weights.len();
        let inst = Instance {
            n,
            k,
            weights,
            dist,
            coords: None,
            forbidden: forbidden.into_iter().map(|(i, j)| normalize_pair(i, j)).collect(),
            wl,
            wu,
            dummy_count: 0,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Builds an instance whose distances are Euclidean distances between
    /// the given points.
    pub fn from_coords(
        k: usize,
        weights: Vec<f64>,
        coords: Vec<[f64; 2]>,
        wl: f64,
        wu: f64,
        forbidden: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Instance> {
        if coords.len() != weights.len() {
            return Err(Error::InvalidInstance(format!(
                "{} coordinates for {} weights",
                coords.len(),
                weights.len()
            )));
        }
        let dist = euclidean_matrix(&coords);
        let mut inst = Instance::new(k, weights, dist, wl, wu, forbidden)?;
        inst.coords = Some(coords);
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        if self.k < 2 {
            return bad(format!("k = {} must be at least 2", self.k));
        }
        if n < 2 * self.k {
            return bad(format!("n = {n} must be at least 2k = {}", 2 * self.k));
        }
        if self.dist.len() != n * n {
            return bad(format!("distance matrix has {} entries, expected {}", self.dist.len(), n * n));
        }
        if let Some(w) = self.weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return bad(format!("weight {w} is negative or not finite"));
        }
        if !self.wl.is_finite() || !self.wu.is_finite() || self.wl > self.wu {
            return bad(format!("weight window [{}, {}] is empty or not finite", self.wl, self.wu));
        }
        for i in 0..n {
            if self.dist[i * n + i] != 0.0 {
                return bad(format!("d({i},{i}) must be zero"));
            }
            for j in (i + 1)..n {
                let d = self.dist[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return bad(format!("d({i},{j}) = {d} is negative or not finite"));
                }
                if d != self.dist[j * n + i] {
                    return bad(format!("distance matrix not symmetric at ({i},{j})"));
                }
            }
        }
        for &(i, j) in &self.forbidden {
            if i == j || j >= n {
                return bad(format!("forbidden pair ({i},{j}) is not a pair of distinct nodes"));
            }
        }
        if self.dummy_count > n {
            return bad("more dummies than nodes".into());
        }
        for v in (n - self.dummy_count)..n {
            if self.weights[v] != 0.0 || (0..n).any(|u| self.dist[v * n + u] != 0.0) {
                return bad(format!("dummy node {v} must have zero weight and zero distances"));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn wl(&self) -> f64 {
        self.wl
    }

    pub fn wu(&self) -> f64 {
        self.wu
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    /// Full row-major distance matrix.
    pub fn dist_matrix(&self) -> &[f64] {
        &self.dist
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    pub fn forbidden(&self) -> &BTreeSet<(usize, usize)> {
        &self.forbidden
    }

    pub fn is_forbidden(&self, i: usize, j: usize) -> bool {
        self.forbidden.contains(&normalize_pair(i, j))
    }

    pub fn dummy_count(&self) -> usize {
        self.dummy_count
    }

    /// Number of nodes that are not dummies.
    pub fn original_n(&self) -> usize {
        self.n - self.dummy_count
    }

    pub fn is_dummy(&self, v: usize) -> bool {
        v >= self.original_n()
    }

    pub fn size_bounds(&self) -> SizeBounds {
        SizeBounds::new(self.n, self.k)
    }

    /// Returns a copy with the given pairs added to the forbidden set.
    pub fn with_forbidden(&self, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Instance> {
        let mut out = self.clone();
        out.forbidden.extend(pairs.into_iter().map(|(i, j)| normalize_pair(i, j)));
        out.validate()?;
        Ok(out)
    }

    /// Necessary condition for a balanced weight-feasible partition:
    /// `max{2, ceil(W/wu)} <= k <= min{floor(n/2), floor(W/wl)}` with `W` the
    /// total weight. A zero `wl` makes the last term unbounded.
    pub fn check_necessary_feasibility(&self) -> bool {
        let total = self.total_weight();
        let k = self.k as f64;
        let lower = if self.wu > 0.0 {
            (total / self.wu - RATIO_EPS).ceil()
        } else if total > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let upper_w = if self.wl > 0.0 {
            (total / self.wl + RATIO_EPS).floor()
        } else {
            f64::INFINITY
        };
        let lo = lower.max(2.0);
        let hi = upper_w.min((self.n / 2) as f64);
        lo <= k && k <= hi
    }

    /// Appends `k - (n mod k)` dummy nodes with zero weight and zero
    /// distances so that `k` divides the node count. Every dummy pair is
    /// forbidden, so no two dummies share a class.
    pub fn add_dummies(&self) -> Result<Instance> {
        if self.n.is_multiple_of(self.k) {
            return Err(Error::InvalidInstance(format!(
                "k = {} already divides n = {}",
                self.k, self.n
            )));
        }
        let extra = self.k - self.n % self.k;
        let n2 = self.n + extra;
        let mut dist = vec![0.0; n2 * n2];
        for i in 0..self.n {
            dist[i * n2..i * n2 + self.n].copy_from_slice(&self.dist[i * self.n..(i + 1) * self.n]);
        }
        let mut weights = self.weights.clone();
        weights.resize(n2, 0.0);
        let mut forbidden = self.forbidden.clone();
        for a in self.n..n2 {
            for b in (a + 1)..n2 {
                forbidden.insert((a, b));
            }
        }
        let out = Instance {
            n: n2,
            k: self.k,
            weights,
            dist,
            coords: None,
            forbidden,
            wl: self.wl,
            wu: self.wu,
            dummy_count: self.dummy_count + extra,
        };
        out.validate()?;
        Ok(out)
    }

    /// Random Euclidean instance: points uniform on `[-100, 100]^2`, weights
    /// uniform on `[0.1, 0.9]`, window `mu * n / k -/+ sigma` with `mu` and
    /// the population standard deviation `sigma` of the drawn weights.
    ///
    /// Draw order: `x_0, y_0, x_1, y_1, ...` then `w_0, w_1, ...`.
    pub fn generate_random(n: usize, k: usize, seed: u64) -> Result<Instance> {
        if k < 2 || n < 2 * k {
            return Err(Error::InvalidInstance(format!(
                "need k >= 2 and n >= 2k, got n = {n}, k = {k}"
            )));
        }
        let mut rng = SplitMix64::new(seed);
        let coords: Vec<[f64; 2]> = (0..n)
            .map(|_| {
                let x = rng.uniform_f64(-100.0, 100.0);
                let y = rng.uniform_f64(-100.0, 100.0);
                [x, y]
            })
            .collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.uniform_f64(0.1, 0.9)).collect();
        let mu = weights.iter().sum::<f64>() / n as f64;
        let sigma = (weights.iter().map(|w| (w - mu) * (w - mu)).sum::<f64>() / n as f64).sqrt();
        let center = mu * n as f64 / k as f64;
        Instance::from_coords(k, weights, coords, center - sigma, center + sigma, [])
    }

    pub fn to_toml(&self) -> String {
        let file = InstanceFile {
            n: self.n,
            k: self.k,
            wl: self.wl,
            wu: self.wu,
            dummy_count: (self.dummy_count > 0).then_some(self.dummy_count),
            weights: self.weights.clone(),
            coords: self.coords.clone(),
            dist: if self.coords.is_some() {
                None
            } else {
                let n = self.n;
                Some((1..n).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| self.dist[i * n + j]).collect())
            },
            forbidden: (!self.forbidden.is_empty())
                .then(|| self.forbidden.iter().map(|&(i, j)| [i, j]).collect()),
        };
        toml::to_string(&file).expect("instance serializes")
    }

    pub fn from_toml(text: &str) -> Result<Instance> {
        let file: InstanceFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_instance()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Instance> {
        Instance::from_toml(&fs::read_to_string(path)?)
    }
}

fn euclidean_matrix(coords: &[[f64; 2]]) -> Vec<f64> {
    let n = coords.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (coords[i][0] - coords[j][0]).hypot(coords[i][1] - coords[j][1]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    dist
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    k: usize,
    wl: f64,
    wu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dummy_count: Option<usize>,
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dist: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    forbidden: Option<Vec<[usize; 2]>>,
}

impl InstanceFile {
    fn into_instance(self) -> Result<Instance> {
        let n = self.n;
        if self.weights.len() != n {
            return Err(Error::Parse(format!("n = {n} but {} weights", self.weights.len())));
        }
        let (dist, coords) = match (self.coords, self.dist) {
            (Some(c), None) => {
                if c.len() != n {
                    return Err(Error::Parse(format!("n = {n} but {} coordinates", c.len())));
                }
                (euclidean_matrix(&c), Some(c))
            }
            (None, Some(lower)) => {
                if lower.len() != n * (n - 1) / 2 {
                    return Err(Error::Parse(format!(
                        "dist has {} entries, expected n(n-1)/2 = {}",
                        lower.len(),
                        n * (n - 1) / 2
                    )));
                }
                let mut dist = vec![0.0; n * n];
                let mut it = lower.into_iter();
                for i in 1..n {
                    for j in 0..i {
                        let d = it.next().unwrap();
                        dist[i * n + j] = d;
                        dist[j * n + i] = d;
                    }
                }
                (dist, None)
            }
            (Some(_), Some(_)) => return Err(Error::Parse("both coords and dist given".into())),
            (None, None) => return Err(Error::Parse("one of coords or dist is required".into())),
        };
        let inst = Instance {
            n,
            k: self.k,
            weights: self.weights,
            dist,
            coords,
            forbidden: self
                .forbidden
                .unwrap_or_default()
                .into_iter()
                .map(|[i, j]| normalize_pair(i, j))
                .collect(),
            wl: self.wl,
            wu: self.wu,
            dummy_count: self.dummy_count.unwrap_or(0),
        };
        inst.validate()?;
        Ok(inst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_instance(n: usize, k: usize, w: f64, wl: f64, wu: f64) -> Instance {
        let mut dist = vec![1.0; n * n];
        for i in 0..n {
            dist[i * n + i] = 0.0;
        }
        Instance::new(k, vec![w; n], dist, wl, wu, []).unwrap()
    }

    #[test]
    fn random_instance_ranges() {
        let inst = Instance::generate_random(34, 6, 1).unwrap();
        assert_eq!(inst.n(), 34);
        let max_d = 200.0 * 2f64.sqrt();
        for i in 0..34 {
            assert!((0.1..=0.9).contains(&inst.weight(i)));
            for j in 0..34 {
                assert!(inst.dist(i, j) <= max_d);
            }
        }
    }

    #[test]
    fn random_window_is_two_sigma() {
        for seed in 0..20 {
            let inst = Instance::generate_random(4, 2, seed).unwrap();
            let w = inst.weights();
            let mu = w.iter().sum::<f64>() / 4.0;
            let sigma = (w.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / 4.0).sqrt();
            assert!(inst.wu() - inst.wl() >= 0.0);
            assert!((inst.wu() - inst.wl() - 2.0 * sigma).abs() < 1e-12);
        }
    }

    #[test]
    fn random_is_deterministic() {
        let a = Instance::generate_random(34, 6, 1).unwrap();
        let b = Instance::generate_random(34, 6, 1).unwrap();
        assert_eq!(a.to_toml(), b.to_toml());
        assert_ne!(a, Instance::generate_random(34, 6, 2).unwrap());
    }

    #[test]
    fn rejects_small_n() {
        assert!(Instance::generate_random(3, 2, 0).is_err());
        assert!(Instance::generate_random(10, 1, 0).is_err());
    }

    #[test]
    fn necessary_feasibility_examples() {
        assert!(unit_instance(6, 2, 1.0, 2.0, 4.0).check_necessary_feasibility());
        assert!(!unit_instance(6, 2, 1.0, 4.0, 10.0).check_necessary_feasibility());
        // k = floor(n/2) boundary: weights decide.
        assert!(unit_instance(8, 4, 1.0, 2.0, 2.0).check_necessary_feasibility());
        assert!(!unit_instance(8, 4, 1.0, 2.5, 3.0).check_necessary_feasibility());
        // wl = 0 never caps k from above.
        assert!(unit_instance(8, 4, 1.0, 0.0, 3.0).check_necessary_feasibility());
    }

    #[test]
    fn dummies_complete_the_node_count() {
        let inst = Instance::generate_random(23, 7, 3).unwrap();
        let d = inst.add_dummies().unwrap();
        assert_eq!(d.n(), 28);
        assert_eq!(d.dummy_count(), 5);
        assert_eq!(d.forbidden().len(), 10);
        for v in 23..28 {
            assert!(d.is_dummy(v));
            assert_eq!(d.weight(v), 0.0);
            assert!((0..28).all(|u| d.dist(u, v) == 0.0));
        }
        assert_eq!(d.dist(3, 7), inst.dist(3, 7));

        let inst = Instance::generate_random(44, 8, 1).unwrap();
        let d = inst.add_dummies().unwrap();
        assert_eq!(d.dummy_count(), 4);
        assert_eq!(d.forbidden().len(), 6);
        assert!(Instance::generate_random(12, 3, 1).unwrap().add_dummies().is_err());
    }

    #[test]
    fn size_bound_values() {
        let s = SizeBounds::new(23, 7);
        assert_eq!((s.fl, s.fu, s.r), (3, 4, 2));
        assert_eq!(s.beta, 27);
        let s = SizeBounds::new(12, 3);
        assert_eq!((s.fl, s.fu, s.r, s.beta), (4, 4, 0, 18));
        for n in 4..60 {
            for k in 2..=n / 2 {
                let s = SizeBounds::new(n, k);
                assert_eq!(n, s.r * s.fu + (k - s.r) * s.fl);
            }
        }
    }

    #[test]
    fn toml_round_trip_coords_and_dist() {
        let inst = Instance::generate_random(9, 2, 11).unwrap();
        let back = Instance::from_toml(&inst.to_toml()).unwrap();
        assert_eq!(inst, back);

        let with_dummies = inst.with_forbidden([(0, 3)]).unwrap().add_dummies().unwrap();
        let text = with_dummies.to_toml();
        assert!(text.contains("dist"));
        assert_eq!(Instance::from_toml(&text).unwrap(), with_dummies);
    }

    #[test]
    fn parser_rejects_unknown_and_ambiguous_fields() {
        let inst = Instance::generate_random(4, 2, 0).unwrap();
        let mut text = inst.to_toml();
        text.push_str("colour = 3\n");
        assert!(matches!(Instance::from_toml(&text), Err(Error::Parse(_))));

        let text = "n = 4\nk = 2\nwl = 0.0\nwu = 1.0\nweights = [0.1, 0.1, 0.1, 0.1]\n";
        assert!(Instance::from_toml(text).is_err());
    }

    #[test]
    fn validation_catches_bad_input() {
        let mut dist = vec![1.0; 16];
        for i in 0..4 {
            dist[i * 4 + i] = 0.0;
        }
        let mut asym = dist.clone();
        asym[1] = 2.0;
        assert!(Instance::new(2, vec![1.0; 4], asym, 0.0, 1.0, []).is_err());
        assert!(Instance::new(2, vec![-1.0, 1.0, 1.0, 1.0], dist.clone(), 0.0, 1.0, []).is_err());
        assert!(Instance::new(2, vec![1.0; 4], dist.clone(), 2.0, 1.0, []).is_err());
        assert!(Instance::new(2, vec![1.0; 4], dist.clone(), 0.0, 1.0, [(1, 1)]).is_err());
        assert!(Instance::new(2, vec![1.0; 4], dist, 0.0, 1.0, [(1, 9)]).is_err());
    }
}
