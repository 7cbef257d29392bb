//! The JSON instance format.
//!
//! ```json
//! {
//!   "points": [{"id": "a", "weight": 0.5}, {"id": "b", "weight": 0.5}],
//!   "partition": [["a", "b"]],
//!   "u": [[1.0, 0.0], [0.0, 0.0]],
//!   "w": [[1.0, 0.0], [1.0, 0.0]]
//! }
//! ```
//!
//! Complex values are always `[re, im]` arrays. Functions are either a list in
//! point order or an object keyed by point id. Instead of `u`/`w` a file may
//! carry a `kernel` (an `n × n` array of complex values over `points`, no
//! partition) or a `recipe` (no points, no partition); exactly one of the
//! three must be present. An optional `supp_tol` overrides the support
//! tolerance.
//!
//! The canonical form lists functions in point order, members of each atom in
//! point order and atoms by their first point. Its SHA-256 is the instance
//! digest.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::condop::CondOpSpec;
use crate::gen::InstanceRecipe;
use crate::kernel::KernelSpec;
use crate::measure::{CFun, MeasureSpace, Partition};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    id: String,
    weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawFunction {
    List(Vec<[f64; 2]>),
    ById(BTreeMap<String, [f64; 2]>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<RawPoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    partition: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u: Option<RawFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<RawFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recipe: Option<InstanceRecipe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    supp_tol: Option<f64>,
}

/// What an instance describes.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum InstanceBody {
    Operator(CondOpSpec),
    Kernel(KernelSpec),
    Recipe(InstanceRecipe),
}

/// A parsed and validated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub body: InstanceBody,
    pub supp_tol: Option<f64>,
}

fn at(location: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Instance {
        location: location.into(),
        msg: msg.into(),
    }
}

fn complex_at(v: [f64; 2], location: impl FnOnce() -> String) -> Result<C64> {
    if v[0].is_finite() && v[1].is_finite() {
        Ok(C64::new(v[0], v[1]))
    } else {
        Err(at(location(), "complex value must be finite"))
    }
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn parse_space(points: &[RawPoint]) -> Result<(MeasureSpace, HashMap<&str, usize>)> {
    if points.is_empty() {
        return Err(at("points", "at least one point is required"));
    }
    let mut index = HashMap::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if p.id.is_empty() {
            return Err(at(format!("points[{i}].id"), "id must not be empty"));
        }
        if let Some(j) = index.insert(p.id.as_str(), i) {
            return Err(at(
                format!("points[{i}].id"),
                format!("duplicate id {:?} (first at points[{j}])", p.id),
            ));
        }
        if !(p.weight.is_finite() && p.weight > 0.0) {
            return Err(at(
                format!("points[{i}].weight"),
                format!("weight must be positive and finite, got {}", p.weight),
            ));
        }
    }
    let space = MeasureSpace::new(
        points.iter().map(|p| p.id.clone()).collect(),
        points.iter().map(|p| p.weight).collect(),
    )
    .map_err(|e| at("points", e.to_string()))?;
    Ok((space, index))
}

fn parse_partition(blocks: &[Vec<String>], index: &HashMap<&str, usize>) -> Result<Partition> {
    let n = index.len();
    let mut owner: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut out = Vec::with_capacity(blocks.len());
    for (b, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            return Err(at(format!("partition[{b}]"), "atoms must not be empty"));
        }
        let mut members = Vec::with_capacity(block.len());
        for (k, id) in block.iter().enumerate() {
            let loc = || format!("partition[{b}][{k}]");
            let &i = index
                .get(id.as_str())
                .ok_or_else(|| at(loc(), format!("unknown point id {id:?}")))?;
            if let Some((pb, pk)) = owner[i] {
                return Err(at(
                    loc(),
                    format!("point {id:?} already listed at partition[{pb}][{pk}]"),
                ));
            }
            owner[i] = Some((b, k));
            members.push(i);
        }
        out.push(members);
    }
    if let Some(i) = owner.iter().position(|o| o.is_none()) {
        let id = index.iter().find(|(_, &j)| j == i).map(|(id, _)| *id).unwrap_or("?");
        return Err(at("partition", format!("point {id:?} belongs to no atom")));
    }
    canonical_partition(n, out)
}

fn canonical_partition(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Partition> {
    for b in &mut blocks {
        b.sort_unstable();
    }
    blocks.sort_unstable_by_key(|b| b[0]);
    Partition::new(n, blocks)
}

fn parse_function(name: &str, f: &RawFunction, space: &MeasureSpace, index: &HashMap<&str, usize>) -> Result<CFun> {
    let n = space.len();
    match f {
        RawFunction::List(values) => {
            if values.len() != n {
                return Err(at(
                    name,
                    format!("expected {n} values (one per point), got {}", values.len()),
                ));
            }
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| complex_at(v, || format!("{name}[{i}]")))
                .collect::<Result<Vec<_>>>()
                .map(CFun::new)
        }
        RawFunction::ById(map) => {
            let mut out = vec![None; n];
            for (id, &v) in map {
                let &i = index
                    .get(id.as_str())
                    .ok_or_else(|| at(format!("{name}.{id}"), "unknown point id"))?;
                out[i] = Some(complex_at(v, || format!("{name}.{id}"))?);
            }
            out.into_iter()
                .enumerate()
                .map(|(i, z)| z.ok_or_else(|| at(name, format!("no value for point {:?}", space.ids()[i]))))
                .collect::<Result<Vec<_>>>()
                .map(CFun::new)
        }
    }
}

fn parse_kernel(rows: &[Vec<[f64; 2]>], space: MeasureSpace) -> Result<KernelSpec> {
    let n = space.len();
    if rows.len() != n {
        return Err(at("kernel", format!("expected {n} rows, got {}", rows.len())));
    }
    let mut k = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for (x, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(at(
                format!("kernel[{x}]"),
                format!("expected {n} entries, got {}", row.len()),
            ));
        }
        for (y, &v) in row.iter().enumerate() {
            k[(x, y)] = complex_at(v, || format!("kernel[{x}][{y}]"))?;
        }
    }
    KernelSpec::new(space, k).map_err(|e| at("kernel", e.to_string()))
}

impl InstanceFile {
    /// Parses and validates instance text. Syntax errors report line and
    /// column, validation errors the offending field.
    pub fn parse(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let raw: RawInstance = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let location = if path.is_empty() || path == "." {
                format!("line {}, column {}", inner.line(), inner.column())
            } else {
                format!("line {}, column {} ({path})", inner.line(), inner.column())
            };
            at(location, inner.to_string())
        })?;
        de.end()
            .map_err(|e| at(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| at(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    fn from_raw(raw: RawInstance) -> Result<Self> {
        if let Some(t) = raw.supp_tol {
            if !(t.is_finite() && t >= 0.0) {
                return Err(at("supp_tol", format!("must be non-negative and finite, got {t}")));
            }
        }
        let explicit = raw.u.is_some() || raw.w.is_some();
        let modes = [explicit, raw.kernel.is_some(), raw.recipe.is_some()];
        match modes.iter().filter(|&&m| m).count() {
            0 => return Err(at("$", "expected exactly one of u/w, kernel or recipe; found none")),
            1 => {}
            _ => return Err(at("$", "expected exactly one of u/w, kernel or recipe; found several")),
        }
        let body = if let Some(recipe) = raw.recipe {
            if raw.points.is_some() {
                return Err(at("points", "not allowed together with recipe"));
            }
            if raw.partition.is_some() {
                return Err(at("partition", "not allowed together with recipe"));
            }
            recipe.validate().map_err(|e| at("recipe", e.to_string()))?;
            InstanceBody::Recipe(recipe)
        } else {
            let points = raw.points.as_deref().ok_or_else(|| at("points", "missing field"))?;
            let (space, index) = parse_space(points)?;
            if let Some(rows) = &raw.kernel {
                if raw.partition.is_some() {
                    return Err(at("partition", "kernel instances take no partition"));
                }
                InstanceBody::Kernel(parse_kernel(rows, space)?)
            } else {
                let blocks = raw
                    .partition
                    .as_deref()
                    .ok_or_else(|| at("partition", "missing field"))?;
                let partition = parse_partition(blocks, &index)?;
                let u = raw.u.as_ref().ok_or_else(|| at("u", "missing field (w is present)"))?;
                let w = raw.w.as_ref().ok_or_else(|| at("w", "missing field (u is present)"))?;
                let u = parse_function("u", u, &space, &index)?;
                let w = parse_function("w", w, &space, &index)?;
                let spec = match raw.supp_tol {
                    Some(t) => CondOpSpec::with_supp_tol(space, partition, u, w, t),
                    None => CondOpSpec::new(space, partition, u, w),
                }
                .map_err(|e| at("$", e.to_string()))?;
                InstanceBody::Operator(spec)
            }
        };
        Ok(Self {
            body,
            supp_tol: raw.supp_tol,
        })
    }

    /// Wraps an operator, with its atoms in canonical order.
    pub fn from_spec(spec: &CondOpSpec) -> Result<Self> {
        let partition = canonical_partition(spec.len(), spec.partition().blocks().to_vec())?;
        let spec = CondOpSpec::with_supp_tol(
            spec.space().clone(),
            partition,
            spec.u().clone(),
            spec.w().clone(),
            spec.supp_tol(),
        )?;
        let supp_tol = (spec.supp_tol() != crate::DEFAULT_SUPP_TOL).then_some(spec.supp_tol());
        Ok(Self {
            body: InstanceBody::Operator(spec),
            supp_tol,
        })
    }

    pub fn from_kernel(kernel: &KernelSpec) -> Self {
        Self {
            body: InstanceBody::Kernel(kernel.clone()),
            supp_tol: None,
        }
    }

    pub fn from_recipe(recipe: InstanceRecipe) -> Self {
        Self {
            body: InstanceBody::Recipe(recipe),
            supp_tol: None,
        }
    }

    fn to_raw(&self) -> RawInstance {
        let points = |space: &MeasureSpace| {
            space
                .ids()
                .iter()
                .zip(space.weights())
                .map(|(id, &weight)| RawPoint { id: id.clone(), weight })
                .collect()
        };
        let mut raw = RawInstance {
            supp_tol: self.supp_tol,
            ..Default::default()
        };
        match &self.body {
            InstanceBody::Operator(spec) => {
                let ids = spec.space().ids();
                let mut blocks: Vec<Vec<usize>> = spec.partition().blocks().to_vec();
                for b in &mut blocks {
                    b.sort_unstable();
                }
                blocks.sort_unstable_by_key(|b| b[0]);
                raw.points = Some(points(spec.space()));
                raw.partition = Some(
                    blocks
                        .iter()
                        .map(|b| b.iter().map(|&i| ids[i].clone()).collect())
                        .collect(),
                );
                raw.u = Some(RawFunction::List(spec.u().values().iter().map(|&z| pair(z)).collect()));
                raw.w = Some(RawFunction::List(spec.w().values().iter().map(|&z| pair(z)).collect()));
            }
            InstanceBody::Kernel(k) => {
                let m = k.kernel();
                raw.points = Some(points(k.base_space()));
                raw.kernel = Some(
                    (0..m.nrows())
                        .map(|x| (0..m.ncols()).map(|y| pair(m[(x, y)])).collect())
                        .collect(),
                );
            }
            InstanceBody::Recipe(r) => raw.recipe = Some(r.clone()),
        }
        raw
    }

    /// Canonical compact JSON.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("instance values are finite")
    }

    /// Canonical JSON, indented for people.
    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("instance values are finite")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }
}
