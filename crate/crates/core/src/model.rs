//! Truss geometry, topology and compatibility assembly.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Spatial axes per node.
pub const AXES: usize = 3;

const MM2_TO_M2: f64 = 1e-6;

/// A bar between two nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Member {
    pub nodes: [usize; 2],
    /// Cross-sectional area in mm².
    pub area_mm2: f64,
    /// Young modulus in Pa.
    pub young_modulus: f64,
}

impl Member {
    pub fn new(a: usize, b: usize, area_mm2: f64, young_modulus: f64) -> Self {
        Self {
            nodes: [a, b],
            area_mm2,
            young_modulus,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BuildOptions {
    /// Accept members whose both ends are fully supported. Such members carry
    /// an all-zero compatibility row and never deform.
    pub allow_fixed_members: bool,
}

/// Immutable truss: geometry, supports, free-DOF numbering, the sparse
/// compatibility matrix `B` (members × free DOFs) and elongation stiffnesses.
#[derive(Clone, Debug, PartialEq)]
pub struct TrussModel {
    nodes: Vec<[f64; 3]>,
    members: Vec<Member>,
    supports: Vec<(usize, usize)>,
    options: BuildOptions,
    dof_map: Vec<[Option<usize>; AXES]>,
    dofs: Vec<(usize, usize)>,
    b: CsrMatrix,
    k: Vec<f64>,
    lengths: Vec<f64>,
}

impl TrussModel {
    /// Assembles a model. `supports` lists fixed `(node, axis)` pairs.
    pub fn build(
        nodes: Vec<[f64; 3]>,
        members: Vec<Member>,
        supports: Vec<(usize, usize)>,
    ) -> Result<Self> {
        Self::build_with(nodes, members, supports, BuildOptions::default())
    }

    pub fn build_with(
        nodes: Vec<[f64; 3]>,
        members: Vec<Member>,
        supports: Vec<(usize, usize)>,
        options: BuildOptions,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::NoMembers);
        }
        let mut fixed = vec![[false; AXES]; nodes.len()];
        for &(node, axis) in &supports {
            if node >= nodes.len() || axis >= AXES {
                return Err(Error::InvalidSupport { node, axis });
            }
            fixed[node][axis] = true;
        }

        let mut dof_map = vec![[None; AXES]; nodes.len()];
        let mut dofs = Vec::new();
        for (n, axes) in fixed.iter().enumerate() {
            for (a, &is_fixed) in axes.iter().enumerate() {
                if !is_fixed {
                    dof_map[n][a] = Some(dofs.len());
                    dofs.push((n, a));
                }
            }
        }
        if dofs.is_empty() {
            return Err(Error::NoFreeDofs);
        }

        let mut rows = Vec::with_capacity(members.len());
        let mut k = Vec::with_capacity(members.len());
        let mut lengths = Vec::with_capacity(members.len());
        let mut touched = vec![false; dofs.len()];
        for (i, m) in members.iter().enumerate() {
            let [a, b] = m.nodes;
            for node in [a, b] {
                if node >= nodes.len() {
                    return Err(Error::InvalidNode {
                        member: i,
                        node,
                        count: nodes.len(),
                    });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(i));
            }
            if !(m.area_mm2 > 0.0 && m.young_modulus > 0.0) {
                return Err(Error::InvalidSection(i));
            }
            let delta: [f64; 3] = std::array::from_fn(|x| nodes[b][x] - nodes[a][x]);
            let len = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            if !(len > 0.0) {
                return Err(Error::ZeroLength(i));
            }
            // elongation = cosᵀ (u_b − u_a)
            let mut row = Vec::with_capacity(2 * AXES);
            for (x, d) in delta.iter().enumerate() {
                let cos = d / len;
                if cos == 0.0 {
                    continue;
                }
                if let Some(j) = dof_map[a][x] {
                    row.push((j, -cos));
                }
                if let Some(j) = dof_map[b][x] {
                    row.push((j, cos));
                }
            }
            if row.is_empty() && !options.allow_fixed_members {
                return Err(Error::FixedMember(i));
            }
            for &(j, _) in &row {
                touched[j] = true;
            }
            rows.push(row);
            k.push(m.young_modulus * m.area_mm2 * MM2_TO_M2 / len);
            lengths.push(len);
        }
        if let Some(dof) = touched.iter().position(|t| !t) {
            let (node, axis) = dofs[dof];
            return Err(Error::UnstiffenedDof { dof, node, axis });
        }

        Ok(Self {
            b: CsrMatrix::from_rows(dofs.len(), &rows),
            nodes,
            members,
            supports,
            options,
            dof_map,
            dofs,
            k,
            lengths,
        })
    }

    /// Number of members `m`.
    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    /// Number of free displacement DOFs `d`.
    pub fn num_dofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn supports(&self) -> &[(usize, usize)] {
        &self.supports
    }

    pub fn options(&self) -> BuildOptions {
        self.options
    }

    /// Compatibility matrix; row `i` maps free displacements to the
    /// elongation of member `i`.
    pub fn compatibility(&self) -> &CsrMatrix {
        &self.b
    }

    /// Elongation stiffnesses `E a / l` in N/m.
    pub fn stiffness(&self) -> &[f64] {
        &self.k
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Member areas in m².
    pub fn areas_m2(&self) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| m.area_mm2 * MM2_TO_M2)
            .collect()
    }

    /// Free-DOF index of `(node, axis)`, `None` when supported.
    pub fn dof(&self, node: usize, axis: usize) -> Option<usize> {
        self.dof_map
            .get(node)
            .and_then(|a| a.get(axis).copied().flatten())
    }

    /// `(node, axis)` of a free DOF.
    pub fn dof_owner(&self, dof: usize) -> (usize, usize) {
        self.dofs[dof]
    }

    /// Load vector putting `force` (N, per axis) on every listed node;
    /// components on supported axes are dropped.
    pub fn nodal_load(&self, nodes: impl IntoIterator<Item = usize>, force: [f64; 3]) -> Vec<f64> {
        let mut f = vec![0.0; self.num_dofs()];
        for n in nodes {
            for (axis, &value) in force.iter().enumerate() {
                if let Some(j) = self.dof(n, axis) {
                    f[j] += value;
                }
            }
        }
        f
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            nodes: self.nodes.clone(),
            members: self
                .members
                .iter()
                .map(|m| (m.nodes[0], m.nodes[1], m.area_mm2, m.young_modulus))
                .collect(),
            supports: self.supports.clone(),
            allow_fixed_members: self.options.allow_fixed_members,
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        Self::build_with(
            file.nodes,
            file.members
                .into_iter()
                .map(|(a, b, area, e)| Member::new(a, b, area, e))
                .collect(),
            file.supports,
            BuildOptions {
                allow_fixed_members: file.allow_fixed_members,
            },
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// On-disk model document.
///
/// ```json
/// { "nodes": [[x, y, z], ...],
///   "members": [[node_a, node_b, area_mm2, young_modulus_pa], ...],
///   "supports": [[node, axis], ...],
///   "allow_fixed_members": false }
/// ```
///
/// Axes are 0 = X, 1 = Y, 2 = Z. `allow_fixed_members` is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub nodes: Vec<[f64; 3]>,
    pub members: Vec<(usize, usize, f64, f64)>,
    pub supports: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_fixed_members: bool,
}

/// Section and material for the barrel-vault generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrelVaultOptions {
    pub area_mm2: f64,
    pub young_modulus: f64,
}

impl Default for BarrelVaultOptions {
    fn default() -> Self {
        Self {
            area_mm2: 500.0,
            young_modulus: 200e9,
        }
    }
}

/// Two-way space grid with square pyramids on a cylindrical arc whose axis
/// is parallel to X.
///
/// The top layer is an `(nx+1) × (ny+1)` grid spaced 1 m along X and placed
/// equiangularly on an arc of rise `ny/4` over a chord of `ny`. Each top
/// square carries a pyramid whose apex sits 1 m (radially) below the square;
/// apexes are joined by bottom chords. Both extreme-Y rows of the top layer
/// are pinned.
///
/// Node numbering: top node `(i, j)` is `i*(ny+1) + j`, apex `(i, j)` is
/// `(nx+1)*(ny+1) + i*ny + j`.
pub fn barrel_vault(nx: usize, ny: usize) -> Result<TrussModel> {
    barrel_vault_with(nx, ny, BarrelVaultOptions::default())
}

pub fn barrel_vault_with(nx: usize, ny: usize, opts: BarrelVaultOptions) -> Result<TrussModel> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidParameter(format!(
            "barrel vault needs nx, ny >= 1 (got {nx}, {ny})"
        )));
    }
    let half_chord = ny as f64 / 2.0;
    let rise = ny as f64 / 4.0;
    let radius = (half_chord * half_chord + rise * rise) / (2.0 * rise);
    let half_angle = (half_chord / radius).asin();
    let dphi = 2.0 * half_angle / ny as f64;
    let bottom_radius = radius * (0.5 * dphi).cos() - 1.0;
    let z_shift = radius - rise;

    let top = |i: usize, j: usize| i * (ny + 1) + j;
    let n_top = (nx + 1) * (ny + 1);
    let apex = |i: usize, j: usize| n_top + i * ny + j;

    let mut nodes = Vec::with_capacity(n_top + nx * ny);
    for i in 0..=nx {
        for j in 0..=ny {
            let phi = -half_angle + dphi * j as f64;
            nodes.push([i as f64, radius * phi.sin(), radius * phi.cos() - z_shift]);
        }
    }
    for i in 0..nx {
        for j in 0..ny {
            let phi = -half_angle + dphi * (j as f64 + 0.5);
            nodes.push([
                i as f64 + 0.5,
                bottom_radius * phi.sin(),
                bottom_radius * phi.cos() - z_shift,
            ]);
        }
    }

    let bar = |a, b| Member::new(a, b, opts.area_mm2, opts.young_modulus);
    let mut members = Vec::with_capacity(8 * nx * ny);
    for i in 0..nx {
        for j in 0..=ny {
            members.push(bar(top(i, j), top(i + 1, j)));
        }
    }
    for i in 0..=nx {
        for j in 0..ny {
            members.push(bar(top(i, j), top(i, j + 1)));
        }
    }
    for i in 0..nx {
        for j in 0..ny {
            let c = apex(i, j);
            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                members.push(bar(c, top(i + di, j + dj)));
            }
        }
    }
    for i in 0..nx.saturating_sub(1) {
        for j in 0..ny {
            members.push(bar(apex(i, j), apex(i + 1, j)));
        }
    }
    for i in 0..nx {
        for j in 0..ny.saturating_sub(1) {
            members.push(bar(apex(i, j), apex(i, j + 1)));
        }
    }

    let mut supports = Vec::with_capacity(6 * (nx + 1));
    for i in 0..=nx {
        for j in [0, ny] {
            for axis in 0..AXES {
                supports.push((top(i, j), axis));
            }
        }
    }

    TrussModel::build_with(
        nodes,
        members,
        supports,
        BuildOptions {
            allow_fixed_members: true,
        },
    )
}

/// Indices of the top-layer nodes of a `barrel_vault(nx, ny)` model.
pub fn barrel_vault_top_nodes(nx: usize, ny: usize) -> std::ops::Range<usize> {
    0..(nx + 1) * (ny + 1)
}

/// Options for the random test-model generator.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomTrussOptions {
    /// Nodes with free displacements.
    pub free_nodes: usize,
    /// Total member count; must be at least `axes × free_nodes`.
    pub members: usize,
    /// Restrict free nodes to the XY plane (Z supported everywhere).
    pub planar: bool,
    /// Draw each stiffness uniformly from this range by choosing the area.
    /// `None` keeps a unit section (`E = 1`, `a = 1 mm²`).
    pub stiffness_range: Option<(f64, f64)>,
    pub seed: u64,
}

/// Random kinematically determinate truss.
///
/// Every free node hangs from `axes` pinned anchors in well-separated
/// directions, which makes `B` full column rank; remaining members join random
/// pairs of free nodes (or add further anchors once all pairs are used). The
/// material has `E = 1`, so stiffness is in consistent abstract units.
pub fn random_truss(opts: &RandomTrussOptions) -> Result<TrussModel> {
    let axes = if opts.planar { 2 } else { 3 };
    let n = opts.free_nodes;
    if n == 0 || opts.members < axes * n {
        return Err(Error::InvalidParameter(format!(
            "random truss needs >= 1 free node and >= {} members",
            axes * n.max(1)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut nodes: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            let z = if opts.planar {
                0.0
            } else {
                rng.gen_range(0.0..4.0)
            };
            [rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0), z]
        })
        .collect();
    let mut supports = Vec::new();
    if opts.planar {
        supports.extend((0..n).map(|i| (i, 2)));
    }
    let mut pairs = Vec::new();

    let mut add_anchor =
        |rng: &mut ChaCha8Rng, nodes: &mut Vec<[f64; 3]>, owner: usize, dir: [f64; 3]| {
            let len = rng.gen_range(1.0..2.5);
            let p = nodes[owner];
            nodes.push([
                p[0] + len * dir[0],
                p[1] + len * dir[1],
                p[2] + len * dir[2],
            ]);
            let id = nodes.len() - 1;
            supports.extend((0..AXES).map(|a| (id, a)));
            (owner, id)
        };

    for owner in 0..n {
        let dirs = anchor_directions(&mut rng, opts.planar);
        for dir in dirs {
            let pair = add_anchor(&mut rng, &mut nodes, owner, dir);
            pairs.push(pair);
        }
    }
    let mut free_pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect();
    while pairs.len() < opts.members {
        if free_pairs.is_empty() {
            let owner = rng.gen_range(0..n);
            let dir = random_unit(&mut rng, opts.planar);
            let pair = add_anchor(&mut rng, &mut nodes, owner, dir);
            pairs.push(pair);
        } else {
            let pick = rng.gen_range(0..free_pairs.len());
            pairs.push(free_pairs.swap_remove(pick));
        }
    }

    let members = pairs
        .iter()
        .map(|&(a, b)| {
            let len = (0..3)
                .map(|x| (nodes[a][x] - nodes[b][x]).powi(2))
                .sum::<f64>()
                .sqrt();
            let area = match opts.stiffness_range {
                Some((lo, hi)) => rng.gen_range(lo..=hi) * len / MM2_TO_M2,
                None => 1.0,
            };
            Member::new(a, b, area, 1.0)
        })
        .collect();
    TrussModel::build(nodes, members, supports)
}

fn random_unit(rng: &mut ChaCha8Rng, planar: bool) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            if planar {
                0.0
            } else {
                rng.gen_range(-1.0..1.0)
            },
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.2 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Unit directions whose determinant (area/volume) is bounded away from 0.
fn anchor_directions(rng: &mut ChaCha8Rng, planar: bool) -> Vec<[f64; 3]> {
    loop {
        if planar {
            let a = random_unit(rng, true);
            let b = random_unit(rng, true);
            if (a[0] * b[1] - a[1] * b[0]).abs() > 0.5 {
                return vec![a, b];
            }
        } else {
            let a = random_unit(rng, false);
            let b = random_unit(rng, false);
            let c = random_unit(rng, false);
            let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                + a[2] * (b[0] * c[1] - b[1] * c[0]);
            if det.abs() > 0.4 {
                return vec![a, b, c];
            }
        }
    }
}
