use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"CCPM";

/// How a parameter is initialized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitKind {
    Zeros,
    Const(f64),
    /// Zero-mean normal with the given standard deviation.
    Normal(f64),
    /// Normal with standard deviation `1/sqrt(fan_in)`.
    FanIn(usize),
}

/// Name, shape and initializer of one parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: InitKind,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: &[usize], init: InitKind) -> Self {
        Self { name: name.into(), shape: shape.to_vec(), init }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Spec builder helpers shared by the model components.
pub(crate) struct SpecList(pub Vec<ParamSpec>);

impl SpecList {
    pub fn push(&mut self, name: String, shape: &[usize], init: InitKind) {
        self.0.push(ParamSpec::new(name, shape, init));
    }

    pub fn linear(&mut self, name: &str, fin: usize, fout: usize) {
        self.push(format!("{name}.w"), &[fin, fout], InitKind::FanIn(fin));
        self.push(format!("{name}.b"), &[fout], InitKind::Zeros);
    }

    pub fn zero_linear(&mut self, name: &str, fin: usize, fout: usize) {
        self.push(format!("{name}.w"), &[fin, fout], InitKind::Zeros);
        self.push(format!("{name}.b"), &[fout], InitKind::Zeros);
    }

    pub fn norm(&mut self, name: &str, c: usize) {
        self.push(format!("{name}.g"), &[c], InitKind::Const(1.0));
        self.push(format!("{name}.b"), &[c], InitKind::Zeros);
    }

    pub fn conv(&mut self, name: &str, k: usize, cin_g: usize, cout: usize, bias: bool) {
        self.push(format!("{name}.w"), &[k, k, cin_g, cout], InitKind::FanIn(k * k * cin_g));
        if bias {
            self.push(format!("{name}.b"), &[cout], InitKind::Zeros);
        }
    }
}

/// Named parameter tensors, ordered by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    tensors: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Materialize `specs`, drawing random values in spec order.
    pub fn initialize(specs: &[ParamSpec], rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut store = Self::new();
        for s in specs {
            let n = s.numel();
            let data: Vec<f64> = match s.init {
                InitKind::Zeros => vec![0.0; n],
                InitKind::Const(v) => vec![v; n],
                InitKind::Normal(std) => sample_normal(rng, n, std),
                InitKind::FanIn(fan) => sample_normal(rng, n, 1.0 / (fan.max(1) as f64).sqrt()),
            };
            if store.tensors.insert(s.name.clone(), Tensor::new(s.shape.clone(), data)).is_some() {
                return Err(Error::Invalid(format!("duplicate parameter name {}", s.name)));
            }
        }
        Ok(store)
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Number of tensors.
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.values().all(Tensor::all_finite)
    }

    /// Check names and shapes against `specs`.
    pub fn check_against(&self, specs: &[ParamSpec]) -> Result<()> {
        for s in specs {
            match self.tensors.get(&s.name) {
                None => return Err(Error::Missing(format!("parameter {}", s.name))),
                Some(t) if t.shape() != s.shape.as_slice() => {
                    return Err(Error::Shape(format!("parameter {}: {:?} vs expected {:?}", s.name, t.shape(), s.shape)))
                }
                _ => {}
            }
        }
        if self.tensors.len() != specs.len() {
            let known: std::collections::BTreeSet<&str> = specs.iter().map(|s| s.name.as_str()).collect();
            let extra: Vec<&str> = self.names().filter(|n| !known.contains(n)).collect();
            return Err(Error::Invalid(format!("unexpected parameters: {}", extra.join(", "))));
        }
        Ok(())
    }

    /// Copy tensors whose names appear in `other`, e.g. to import pretrained
    /// weights. Returns the number of tensors copied.
    pub fn import(&mut self, other: &ParamStore, filter: impl Fn(&str) -> bool) -> Result<usize> {
        let mut n = 0;
        for (name, t) in other.iter() {
            if !filter(name) {
                continue;
            }
            let Some(dst) = self.tensors.get_mut(name) else { continue };
            if dst.shape() != t.shape() {
                return Err(Error::Shape(format!("import {name}: {:?} vs {:?}", t.shape(), dst.shape())));
            }
            *dst = t.clone();
            n += 1;
        }
        Ok(n)
    }

    /// Record every tensor on `g`; names for which `trainable` is false become constants.
    pub fn bind<'g>(&self, g: &'g Graph, trainable: impl Fn(&str) -> bool) -> Bound<'g> {
        let vars = self
            .tensors
            .iter()
            .map(|(k, t)| {
                let v = if trainable(k) { g.param(t.clone()) } else { g.constant(t.clone()) };
                (k.clone(), v)
            })
            .collect();
        Bound { vars }
    }

    /// Binary archive: magic, count, then per tensor the name, shape and
    /// little-endian f64 values. Round trips bit-exactly.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.numel() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Invalid(format!("parameter archive: {m}"));
        let mut take = |n: usize| -> Result<Vec<u8>> {
            let mut buf = vec![0u8; n];
            bytes.read_exact(&mut buf).map_err(|_| bad("truncated"))?;
            Ok(buf)
        };
        if take(4)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_of = |b: Vec<u8>| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
        let count = u32_of(take(4)?);
        let mut store = Self::new();
        for _ in 0..count {
            let len = u32_of(take(4)?);
            let name = String::from_utf8(take(len)?).map_err(|_| bad("name is not UTF-8"))?;
            let rank = u32_of(take(4)?);
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize);
            }
            let n: usize = shape.iter().product();
            let raw = take(n * 8)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            store.tensors.insert(name, Tensor::new(shape, data));
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn sample_normal(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    if std == 0.0 {
        return vec![0.0; n];
    }
    let dist = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Parameters recorded on one graph.
pub struct Bound<'g> {
    vars: BTreeMap<String, Var<'g>>,
}

impl<'g> Bound<'g> {
    pub fn get(&self, name: &str) -> Var<'g> {
        *self.vars.get(name).unwrap_or_else(|| panic!("parameter {name} not bound"))
    }

    pub fn try_get(&self, name: &str) -> Option<Var<'g>> {
        self.vars.get(name).copied()
    }

    /// Gradients of the last backward pass, keyed by name. Constants and
    /// parameters that did not influence the root are absent.
    pub fn grads(&self) -> BTreeMap<String, Tensor> {
        self.vars
            .iter()
            .filter_map(|(k, v)| v.graph().grad(*v).map(|g| (k.clone(), g)))
            .collect()
    }

    pub(crate) fn linear(&self, name: &str, x: Var<'g>) -> Var<'g> {
        x.matmul(self.get(&format!("{name}.w"))).add(self.get(&format!("{name}.b")))
    }

    pub(crate) fn norm(&self, name: &str, x: Var<'g>, eps: f64) -> Var<'g> {
        x.layer_norm(self.get(&format!("{name}.g")), self.get(&format!("{name}.b")), eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn archive_round_trip_is_bit_exact() {
        let specs = vec![
            ParamSpec::new("a.w", &[3, 4], InitKind::FanIn(3)),
            ParamSpec::new("a.b", &[4], InitKind::Zeros),
            ParamSpec::new("s", &[], InitKind::Const(-0.0)),
        ];
        let mut store = ParamStore::initialize(&specs, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        store.get_mut("a.b").unwrap().data_mut()[1] = f64::MIN_POSITIVE / 3.0;
        let back = ParamStore::from_bytes(&store.to_bytes()).unwrap();
        for (name, t) in store.iter() {
            let u = back.get(name).unwrap();
            assert_eq!(t.shape(), u.shape());
            let bits = |x: &Tensor| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(t), bits(u), "{name}");
        }
        back.check_against(&specs).unwrap();
        assert!(ParamStore::from_bytes(&store.to_bytes()[..20]).is_err());
    }

    #[test]
    fn same_seed_same_init() {
        let specs = vec![ParamSpec::new("w", &[5, 5], InitKind::Normal(0.02))];
        let a = ParamStore::initialize(&specs, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = ParamStore::initialize(&specs, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let c = ParamStore::initialize(&specs, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn check_against_reports_mismatches() {
        let specs = vec![ParamSpec::new("w", &[2], InitKind::Zeros)];
        let mut store = ParamStore::new();
        assert!(matches!(store.check_against(&specs), Err(Error::Missing(_))));
        store.insert("w", Tensor::zeros(&[3]));
        assert!(matches!(store.check_against(&specs), Err(Error::Shape(_))));
        store.insert("w", Tensor::zeros(&[2]));
        store.insert("extra", Tensor::zeros(&[1]));
        assert!(store.check_against(&specs).is_err());
    }
}
