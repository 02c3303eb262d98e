//! Network model and mixing matrices.
//!
//! A network is a set of `D` sub-networks, each a hub with its own workers,
//! plus an undirected hub graph. From the worker weights we derive
//!
//! * `a`: worker weight normalized over all workers,
//! * `b`: sub-network weight share,
//! * `v`: worker weight normalized within its sub-network,
//!
//! and the three column-stochastic operators applied to the model matrix
//! from the right: the identity, the block-diagonal sub-network average `V`,
//! and the combined sub-network-then-hub average `Z` with
//! `Z[i][j] = H[d(i)][d(j)] * v[i]`.
//!
//! The hub matrix `H` must be column stochastic, supported on the hub graph,
//! and reversible with respect to `b` in the sense `H[i][j] b[j] = H[j][i] b[i]`,
//! which makes `b` its right Perron vector.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::spectral;

/// Tolerance for validating a user-supplied hub matrix.
pub const HUB_MATRIX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerSpec {
    pub id: usize,
    pub sub_network: usize,
    pub weight: f64,
    pub step_prob: f64,
}

/// Named hub-graph shapes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HubTopology {
    Complete,
    Path,
    Ring,
    CustomEdgeList(Vec<(usize, usize)>),
}

impl HubTopology {
    pub fn edges(&self, hubs: usize) -> Vec<(usize, usize)> {
        match self {
            HubTopology::Complete => (0..hubs)
                .flat_map(|i| (i + 1..hubs).map(move |j| (i, j)))
                .collect(),
            HubTopology::Path => (1..hubs).map(|i| (i - 1, i)).collect(),
            HubTopology::Ring => {
                let mut e: Vec<_> = (1..hubs).map(|i| (i - 1, i)).collect();
                if hubs > 2 {
                    e.push((hubs - 1, 0));
                }
                e
            }
            HubTopology::CustomEdgeList(e) => e.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub workers: Vec<WorkerSpec>,
    pub num_subnets: usize,
    pub hub_edges: Vec<(usize, usize)>,
}

impl NetworkSpec {
    /// `hubs` sub-networks of `per_hub` workers each, unit weights and
    /// `p_i = 1`. Worker ids are assigned hub-major.
    pub fn uniform(hubs: usize, per_hub: usize, topology: &HubTopology) -> Self {
        let workers = (0..hubs * per_hub)
            .map(|id| WorkerSpec {
                id,
                sub_network: id / per_hub,
                weight: 1.0,
                step_prob: 1.0,
            })
            .collect();
        Self {
            workers,
            num_subnets: hubs,
            hub_edges: topology.edges(hubs),
        }
    }

    pub fn num_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn step_probs(&self) -> Vec<f64> {
        self.workers.iter().map(|w| w.step_prob).collect()
    }

    pub fn with_step_probs(mut self, p: &[f64]) -> Result<Self> {
        if p.len() != self.workers.len() {
            return Err(Error::Dimension(format!(
                "{} step probabilities for {} workers",
                p.len(),
                self.workers.len()
            )));
        }
        for (w, &pi) in self.workers.iter_mut().zip(p) {
            w.step_prob = pi;
        }
        Ok(self)
    }

    pub fn with_weights(mut self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.workers.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} workers",
                weights.len(),
                self.workers.len()
            )));
        }
        for (w, &wi) in self.workers.iter_mut().zip(weights) {
            w.weight = wi;
        }
        Ok(self)
    }

    /// Worker indices of each sub-network, in id order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.num_subnets];
        for w in &self.workers {
            if w.sub_network < self.num_subnets {
                m[w.sub_network].push(w.id);
            }
        }
        m
    }

    pub fn hub_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_subnets];
        for &(i, j) in &self.normalized_edges() {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Edges as ordered `(min, max)` pairs with duplicates removed.
    fn normalized_edges(&self) -> BTreeSet<(usize, usize)> {
        self.hub_edges
            .iter()
            .map(|&(i, j)| (i.min(j), i.max(j)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.num_subnets;
        if d == 0 {
            return Err(Error::InvalidNetwork("no sub-networks".into()));
        }
        if self.workers.is_empty() {
            return Err(Error::InvalidNetwork("no workers".into()));
        }
        for (idx, w) in self.workers.iter().enumerate() {
            if w.id != idx {
                return Err(Error::InvalidNetwork(format!(
                    "worker at position {idx} has id {}",
                    w.id
                )));
            }
            if w.sub_network >= d {
                return Err(Error::InvalidNetwork(format!(
                    "worker {} assigned to sub-network {} of {d}",
                    w.id, w.sub_network
                )));
            }
            if !(w.weight > 0.0 && w.weight.is_finite()) {
                return Err(Error::InvalidNetwork(format!(
                    "worker {} has nonpositive weight {}",
                    w.id, w.weight
                )));
            }
            if !(w.step_prob > 0.0 && w.step_prob <= 1.0) {
                return Err(Error::InvalidNetwork(format!(
                    "worker {} step probability {} outside (0, 1]",
                    w.id, w.step_prob
                )));
            }
        }
        if let Some(empty) = self.members().iter().position(Vec::is_empty) {
            return Err(Error::InvalidNetwork(format!(
                "sub-network {empty} has no workers"
            )));
        }
        for &(i, j) in &self.hub_edges {
            if i >= d || j >= d {
                return Err(Error::InvalidNetwork(format!(
                    "hub edge ({i}, {j}) out of range for {d} hubs"
                )));
            }
            if i == j {
                return Err(Error::InvalidNetwork(format!("self-loop on hub {i}")));
            }
        }
        let components = count_components(d, &self.hub_edges);
        if components != 1 {
            return Err(Error::Disconnected {
                components,
                hubs: d,
            });
        }
        Ok(())
    }
}

fn count_components(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for &(i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            components -= 1;
        }
    }
    components
}

/// Random connected graph: a random spanning tree plus each remaining pair
/// with probability `extra_edge_prob`.
pub fn random_connected_edges<R: Rng + ?Sized>(
    hubs: usize,
    extra_edge_prob: f64,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let mut set = BTreeSet::new();
    for i in 1..hubs {
        let j = rng.gen_range(0..i);
        set.insert((j, i));
    }
    for i in 0..hubs {
        for j in i + 1..hubs {
            if !set.contains(&(i, j)) && rng.gen_bool(extra_edge_prob) {
                set.insert((i, j));
            }
        }
    }
    set.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVectors {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn build_weight_vectors(net: &NetworkSpec) -> Result<WeightVectors> {
    if let Some(w) = net.workers.iter().find(|w| w.weight.is_nan() || w.weight <= 0.0) {
        return Err(Error::InvalidNetwork(format!(
            "worker {} has nonpositive weight {}",
            w.id, w.weight
        )));
    }
    let total: f64 = net.workers.iter().map(|w| w.weight).sum();
    let mut subnet_total = vec![0.0; net.num_subnets];
    for w in &net.workers {
        subnet_total[w.sub_network] += w.weight;
    }
    let a = net.workers.iter().map(|w| w.weight / total).collect();
    let b = subnet_total.iter().map(|s| s / total).collect();
    let v = net
        .workers
        .iter()
        .map(|w| w.weight / subnet_total[w.sub_network])
        .collect();
    Ok(WeightVectors { a, b, v })
}

/// Metropolis-style hub matrix for the graph and target vector `b`.
///
/// Off-diagonal mass `M[i][j] = min(b_i, b_j) / (1 + max(deg_i, deg_j))` on
/// edges is symmetric, `H[i][j] = M[i][j] / b_j`, and the diagonal takes
/// whatever is left of each column. Since `deg_j * min(b) / (1 + deg_j) < b_j`
/// the diagonal is strictly positive.
pub fn build_hub_matrix(net: &NetworkSpec, b: &[f64]) -> Result<Matrix> {
    let d = net.num_subnets;
    if b.len() != d {
        return Err(Error::Dimension(format!(
            "b has length {} for {d} hubs",
            b.len()
        )));
    }
    if let Some(k) = b.iter().position(|&x| x.is_nan() || x <= 0.0) {
        return Err(Error::InvalidNetwork(format!(
            "degenerate sub-network weight b[{k}] = {}",
            b[k]
        )));
    }
    let components = count_components(d, &net.hub_edges);
    if components != 1 {
        return Err(Error::Disconnected {
            components,
            hubs: d,
        });
    }
    let deg = net.hub_degrees();
    let mut h = Matrix::zeros(d, d);
    for &(i, j) in &net.normalized_edges() {
        let m = b[i].min(b[j]) / (1 + deg[i].max(deg[j])) as f64;
        h[(i, j)] = m / b[j];
        h[(j, i)] = m / b[i];
    }
    for j in 0..d {
        let off: f64 = (0..d).filter(|&i| i != j).map(|i| h[(i, j)]).sum();
        h[(j, j)] = 1.0 - off;
    }
    Ok(h)
}

/// Checks a hub matrix against the support, stochasticity and reversibility
/// requirements. Returns the largest residual on success.
pub fn validate_hub_matrix(h: &Matrix, net: &NetworkSpec, b: &[f64], tol: f64) -> Result<f64> {
    let d = net.num_subnets;
    if h.rows() != d || h.cols() != d {
        return Err(Error::Dimension(format!(
            "hub matrix is {}x{}, expected {d}x{d}",
            h.rows(),
            h.cols()
        )));
    }
    if !h.is_finite() {
        return Err(Error::InvalidHubMatrix("non-finite entry".into()));
    }
    let edges = net.normalized_edges();
    for i in 0..d {
        for j in 0..d {
            let x = h[(i, j)];
            if x < -tol {
                return Err(Error::InvalidHubMatrix(format!("H[{i}][{j}] = {x} < 0")));
            }
            if i != j {
                let on_edge = edges.contains(&(i.min(j), i.max(j)));
                if on_edge && x <= 0.0 {
                    return Err(Error::InvalidHubMatrix(format!(
                        "H[{i}][{j}] = {x} must be positive on hub edge"
                    )));
                }
                if !on_edge && x.abs() > tol {
                    return Err(Error::InvalidHubMatrix(format!(
                        "H[{i}][{j}] = {x} must be zero off the hub graph"
                    )));
                }
            }
        }
    }
    let col_res = column_stochastic_residual(h);
    if col_res > tol {
        return Err(Error::InvalidHubMatrix(format!(
            "column sums deviate from 1 by {col_res:.3e}"
        )));
    }
    let db_res = detailed_balance_residual(h, b);
    if db_res > tol {
        return Err(Error::InvalidHubMatrix(format!(
            "detailed balance residual {db_res:.3e}"
        )));
    }
    Ok(col_res.max(db_res))
}

pub fn column_stochastic_residual(m: &Matrix) -> f64 {
    m.column_sums()
        .iter()
        .fold(0.0, |r, s| f64::max(r, (s - 1.0).abs()))
}

/// `max |H[i][j] b[j] - H[j][i] b[i]|`.
pub fn detailed_balance_residual(h: &Matrix, b: &[f64]) -> f64 {
    let d = h.rows();
    let mut r: f64 = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            r = r.max((h[(i, j)] * b[j] - h[(j, i)] * b[i]).abs());
        }
    }
    r
}

/// Block-diagonal sub-network averaging operator.
pub fn build_v(net: &NetworkSpec, v: &[f64]) -> Result<Matrix> {
    let n = net.num_workers();
    if v.len() != n {
        return Err(Error::Dimension(format!(
            "v has length {} for {n} workers",
            v.len()
        )));
    }
    let subnet: Vec<usize> = net.workers.iter().map(|w| w.sub_network).collect();
    Ok(Matrix::from_fn(n, n, |i, j| {
        if subnet[i] == subnet[j] {
            v[i]
        } else {
            0.0
        }
    }))
}

/// Combined sub-network and hub averaging operator.
pub fn build_z(net: &NetworkSpec, h: &Matrix, v: &[f64]) -> Result<Matrix> {
    let n = net.num_workers();
    if h.rows() != net.num_subnets || h.cols() != net.num_subnets {
        return Err(Error::Dimension(format!(
            "hub matrix is {}x{} for {} hubs",
            h.rows(),
            h.cols(),
            net.num_subnets
        )));
    }
    if v.len() != n {
        return Err(Error::Dimension(format!(
            "v has length {} for {n} workers",
            v.len()
        )));
    }
    let subnet: Vec<usize> = net.workers.iter().map(|w| w.sub_network).collect();
    Ok(Matrix::from_fn(n, n, |i, j| {
        h[(subnet[i], subnet[j])] * v[i]
    }))
}

/// Which operator multiplies the model matrix after step `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    Identity,
    V,
    Z,
}

/// Operator schedule over global time steps `k >= 1`: `Z` every `q*tau`
/// steps, `V` at the other multiples of `tau`, identity otherwise.
pub fn select_t(k: usize, tau: usize, q: usize) -> Operator {
    if k.is_multiple_of(q * tau) {
        Operator::Z
    } else if k.is_multiple_of(tau) {
        Operator::V
    } else {
        Operator::Identity
    }
}

/// Where the hub matrix comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum HubMatrixSource {
    Metropolis,
    Explicit(Matrix),
}

/// All mixing quantities for one network.
#[derive(Debug, Clone)]
pub struct MixingSet {
    pub h: Matrix,
    pub v_matrix: Matrix,
    pub z: Matrix,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub v: Vec<f64>,
    pub zeta: f64,
    pub subnet_of: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

impl MixingSet {
    pub fn build(net: &NetworkSpec, source: &HubMatrixSource) -> Result<Self> {
        net.validate()?;
        let WeightVectors { a, b, v } = build_weight_vectors(net)?;
        let h = match source {
            HubMatrixSource::Metropolis => build_hub_matrix(net, &b)?,
            HubMatrixSource::Explicit(h) => {
                validate_hub_matrix(h, net, &b, HUB_MATRIX_TOL)?;
                h.clone()
            }
        };
        let spectrum = spectral::eigen_detailed_balance(&h, &b)?;
        let zeta = spectral::zeta(&spectrum);
        if zeta >= 1.0 - 1e-12 && net.num_subnets > 1 {
            return Err(Error::InvalidHubMatrix(format!(
                "second eigenvalue magnitude {zeta} is not below 1"
            )));
        }
        let v_matrix = build_v(net, &v)?;
        let z = build_z(net, &h, &v)?;
        Ok(Self {
            h,
            v_matrix,
            z,
            a,
            b,
            v,
            zeta,
            subnet_of: net.workers.iter().map(|w| w.sub_network).collect(),
            members: net.members(),
        })
    }

    pub fn num_workers(&self) -> usize {
        self.a.len()
    }

    pub fn num_subnets(&self) -> usize {
        self.b.len()
    }

    pub fn operator(&self, op: Operator) -> Matrix {
        match op {
            Operator::Identity => Matrix::identity(self.num_workers()),
            Operator::V => self.v_matrix.clone(),
            Operator::Z => self.z.clone(),
        }
    }

    /// `A = a 1ᵀ`.
    pub fn consensus_projector(&self) -> Matrix {
        Matrix::outer(&self.a, &vec![1.0; self.num_workers()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_by_two(weights: [f64; 4]) -> NetworkSpec {
        NetworkSpec::uniform(2, 2, &HubTopology::Complete)
            .with_weights(&weights)
            .unwrap()
    }

    fn assert_vec_close(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn uniform_weight_vectors() {
        let wv = build_weight_vectors(&two_by_two([1.0; 4])).unwrap();
        assert_eq!(wv.a, vec![0.25; 4]);
        assert_eq!(wv.b, vec![0.5; 2]);
        assert_eq!(wv.v, vec![0.5; 4]);
    }

    #[test]
    fn mixed_weight_vectors() {
        let wv = build_weight_vectors(&two_by_two([1.0, 3.0, 2.0, 2.0])).unwrap();
        assert_vec_close(&wv.v, &[0.25, 0.75, 0.5, 0.5], 1e-15);
        assert_vec_close(&wv.b, &[0.5, 0.5], 1e-15);
        assert_vec_close(&wv.a, &[0.125, 0.375, 0.25, 0.25], 1e-15);
    }

    #[test]
    fn fedavg_weights_are_shard_shares() {
        let sizes = [5.0, 10.0, 20.0, 25.0, 40.0];
        let net = NetworkSpec::uniform(1, 5, &HubTopology::Complete)
            .with_weights(&sizes)
            .unwrap();
        let wv = build_weight_vectors(&net).unwrap();
        let want: Vec<f64> = sizes.iter().map(|s| s / 100.0).collect();
        assert_vec_close(&wv.v, &want, 1e-15);
        assert_vec_close(&wv.a, &want, 1e-15);
    }

    #[test]
    fn rejects_nonpositive_weight() {
        let net = two_by_two([1.0, 0.0, 1.0, 1.0]);
        assert!(build_weight_vectors(&net).is_err());
        assert!(net.validate().is_err());
    }

    #[test]
    fn metropolis_two_hubs_complete_is_exact_average() {
        let net = two_by_two([1.0; 4]);
        let h = build_hub_matrix(&net, &[0.5, 0.5]).unwrap();
        assert!(
            h.max_abs_diff(&Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()) < 1e-15
        );
        let mix = MixingSet::build(&net, &HubMatrixSource::Metropolis).unwrap();
        assert!(mix.zeta < 1e-12);
    }

    #[test]
    fn single_hub_matrix_is_one() {
        let net = NetworkSpec::uniform(1, 3, &HubTopology::Complete);
        let h = build_hub_matrix(&net, &[1.0]).unwrap();
        assert_eq!(h, Matrix::identity(1));
        let mix = MixingSet::build(&net, &HubMatrixSource::Metropolis).unwrap();
        assert_eq!(mix.zeta, 0.0);
        assert_eq!(mix.z, mix.v_matrix);
    }

    #[test]
    fn path_graph_has_intermediate_zeta() {
        let net = NetworkSpec::uniform(5, 1, &HubTopology::Path);
        let mix = MixingSet::build(&net, &HubMatrixSource::Metropolis).unwrap();
        assert!(mix.zeta > 0.0 && mix.zeta < 1.0, "zeta = {}", mix.zeta);
        // support follows the path exactly
        for i in 0..5usize {
            for j in 0..5 {
                let adjacent = i.abs_diff(j) == 1;
                if adjacent {
                    assert!(mix.h[(i, j)] > 0.0);
                } else if i != j {
                    assert_eq!(mix.h[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn disconnected_graph_rejected() {
        let mut net = NetworkSpec::uniform(3, 1, &HubTopology::Complete);
        net.hub_edges = vec![(0, 1)];
        assert!(matches!(
            build_hub_matrix(&net, &[1.0 / 3.0; 3]),
            Err(Error::Disconnected { components: 2, .. })
        ));
        assert!(net.validate().is_err());
    }

    #[test]
    fn degenerate_b_rejected() {
        let net = NetworkSpec::uniform(2, 1, &HubTopology::Complete);
        assert!(build_hub_matrix(&net, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn invalid_networks() {
        let mut net = NetworkSpec::uniform(2, 1, &HubTopology::Complete);
        net.hub_edges.push((1, 1));
        assert!(net.validate().is_err());

        let mut net = NetworkSpec::uniform(3, 1, &HubTopology::Path);
        net.workers[2].sub_network = 0;
        assert!(net.validate().is_err(), "empty sub-network accepted");

        let net = NetworkSpec::uniform(2, 1, &HubTopology::Complete)
            .with_step_probs(&[1.0, 1.5])
            .unwrap();
        assert!(net.validate().is_err());
    }

    #[test]
    fn v_for_small_cases() {
        let net = NetworkSpec::uniform(1, 2, &HubTopology::Complete);
        let v = build_v(&net, &[0.5, 0.5]).unwrap();
        assert_eq!(
            v,
            Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()
        );

        let net = NetworkSpec::uniform(2, 1, &HubTopology::Complete);
        assert_eq!(build_v(&net, &[1.0, 1.0]).unwrap(), Matrix::identity(2));

        let net = NetworkSpec::uniform(1, 2, &HubTopology::Complete);
        let v = build_v(&net, &[0.25, 0.75]).unwrap();
        assert_eq!(
            v,
            Matrix::from_rows(&[vec![0.25, 0.25], vec![0.75, 0.75]]).unwrap()
        );
        assert!((&v * &v).max_abs_diff(&v) < 1e-15);
    }

    #[test]
    fn z_reduces_to_h_with_singleton_subnets() {
        let net = NetworkSpec::uniform(2, 1, &HubTopology::Complete);
        let h = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(build_z(&net, &h, &[1.0, 1.0]).unwrap(), h);
        assert!(build_z(&net, &Matrix::identity(3), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn schedule() {
        assert_eq!(select_t(32, 8, 4), Operator::Z);
        assert_eq!(select_t(16, 8, 4), Operator::V);
        assert_eq!(select_t(7, 8, 4), Operator::Identity);
        assert_eq!(select_t(5, 1, 1), Operator::Z);
    }

    #[test]
    fn explicit_hub_matrix_validation() {
        let net = NetworkSpec::uniform(2, 1, &HubTopology::Complete)
            .with_weights(&[1.0, 3.0])
            .unwrap();
        // H = b 1ᵀ, exact averaging for any b
        let good = Matrix::from_rows(&[vec![0.25, 0.25], vec![0.75, 0.75]]).unwrap();
        let mix = MixingSet::build(&net, &HubMatrixSource::Explicit(good)).unwrap();
        assert!(mix.zeta < 1e-12);

        // column stochastic but not reversible for b = (1/4, 3/4)
        let bad = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let err = MixingSet::build(&net, &HubMatrixSource::Explicit(bad)).unwrap_err();
        assert!(err.to_string().contains("detailed balance"), "{err}");
    }

    #[test]
    fn random_graphs_are_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..20 {
            let e = random_connected_edges(d, 0.2, &mut rng);
            assert_eq!(count_components(d, &e), 1);
            assert!(e.iter().all(|&(i, j)| i < j && j < d));
        }
    }

    #[test]
    fn ring_and_path_edges() {
        assert_eq!(HubTopology::Path.edges(3), vec![(0, 1), (1, 2)]);
        assert_eq!(HubTopology::Ring.edges(3), vec![(0, 1), (1, 2), (2, 0)]);
        assert_eq!(HubTopology::Ring.edges(2), vec![(0, 1)]);
        assert_eq!(HubTopology::Complete.edges(3).len(), 3);
    }
}
