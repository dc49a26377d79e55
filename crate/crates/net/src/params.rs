//! Named parameter storage and deterministic initialisation.

use std::collections::HashMap;

use edei_core::rng::{self, Stream};
use rand::Rng;

use crate::graph::{Graph, Var};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    FanIn(usize),
    Zeros,
    Ones,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<S> {
    names: Vec<String>,
    values: Vec<Tensor<S>>,
    index: HashMap<String, usize>,
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<S: Scalar> ParamStore<S> {
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }
    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }
    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.values[id.0]
    }
    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.values[id.0]
    }
    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.values.iter().map(|t| t.len()).sum()
    }

    /// Scalar count over parameters whose name satisfies `keep`.
    pub fn count_where(&self, keep: impl Fn(&str) -> bool) -> usize {
        self.names
            .iter()
            .zip(&self.values)
            .filter(|(n, _)| keep(n))
            .map(|(_, t)| t.len())
            .sum()
    }

    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        ParamStore {
            names: self.names.clone(),
            values: self.values.iter().map(|t| t.cast()).collect(),
            index: self.index.clone(),
        }
    }

    /// Registers a tensor; names must be unique.
    pub fn insert(&mut self, name: String, value: Tensor<S>) -> ParamId {
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.values.len());
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Replaces every tensor with uniform noise in `[-scale, scale]`.
    pub fn randomize(&mut self, seed: u64, scale: f64) {
        for (i, t) in self.values.iter_mut().enumerate() {
            let mut r = rng::keyed(seed, Stream::Init, i as u64, 1);
            t.data_mut()
                .iter_mut()
                .for_each(|v| *v = S::of(r.random_range(-scale..=scale)));
        }
    }

    /// Places every parameter on the tape; `trainable` decides which ones
    /// are gradient leaves and which are constants.
    pub fn bind(&self, g: &mut Graph<S>, trainable: impl Fn(&str) -> bool) -> Bound {
        let vars = self
            .names
            .iter()
            .zip(&self.values)
            .map(|(n, t)| {
                if trainable(n) {
                    g.leaf(t.clone())
                } else {
                    g.constant(t.clone())
                }
            })
            .collect();
        Bound { vars }
    }
}

/// Parameters placed on one tape.
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    #[inline]
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Hierarchically named parameter construction with seeded initial values.
pub struct Builder<'a, S> {
    store: &'a mut ParamStore<S>,
    prefix: String,
    seed: u64,
}

impl<'a, S: Scalar> Builder<'a, S> {
    pub fn new(store: &'a mut ParamStore<S>, seed: u64) -> Self {
        Self {
            store,
            prefix: String::new(),
            seed,
        }
    }

    /// A child builder whose names are prefixed with `name.`.
    pub fn sub(&mut self, name: &str) -> Builder<'_, S> {
        Builder {
            prefix: format!("{}{name}.", self.prefix),
            store: self.store,
            seed: self.seed,
        }
    }

    pub fn param(&mut self, name: &str, shape: [usize; 4], init: Init) -> ParamId {
        let full = format!("{}{name}", self.prefix);
        let idx = self.store.len() as u64;
        let t = match init {
            Init::Zeros => Tensor::zeros(shape),
            Init::Ones => Tensor::full(shape, S::one()),
            Init::FanIn(fan) => {
                let bound = 1.0 / (fan.max(1) as f64).sqrt();
                let mut r = rng::keyed(self.seed, Stream::Init, idx, 0);
                let data = (0..shape.iter().product::<usize>())
                    .map(|_| S::of(r.random_range(-bound..bound)))
                    .collect();
                Tensor::from_vec(shape, data)
            }
        };
        self.store.insert(full, t)
    }
}
