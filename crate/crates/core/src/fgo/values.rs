use std::collections::HashMap;
use std::fmt;

use nalgebra::{DVector, Vector4};

use crate::dynamics::{QuadState, RotorSpeeds, Vector12, Wrench};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VariableKind {
    State,
    Wrench,
    Rotor,
}

impl VariableKind {
    pub fn tangent_dim(self) -> usize {
        match self {
            VariableKind::State => 12,
            VariableKind::Wrench | VariableKind::Rotor => 4,
        }
    }

    fn symbol(self) -> char {
        match self {
            VariableKind::State => 'x',
            VariableKind::Wrench => 'w',
            VariableKind::Rotor => 'u',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariableKey {
    pub kind: VariableKind,
    pub index: usize,
}

impl VariableKey {
    pub fn state(index: usize) -> Self {
        Self {
            kind: VariableKind::State,
            index,
        }
    }

    pub fn wrench(index: usize) -> Self {
        Self {
            kind: VariableKind::Wrench,
            index,
        }
    }

    pub fn rotor(index: usize) -> Self {
        Self {
            kind: VariableKind::Rotor,
            index,
        }
    }
}

impl fmt::Display for VariableKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.symbol(), self.index)
    }
}

/// Smallest squared rotor speed a retraction can produce.
const MIN_SQUARED_SPEED: f64 = 1e-12;

/// Rotor retraction `u ⊕ δ = √(u² + δ)`, applied per rotor. The allocation
/// map is linear in squared speeds, so this keeps its factor linear in the
/// tangent.
pub fn rotor_retract(u: &RotorSpeeds, delta: &[f64]) -> RotorSpeeds {
    RotorSpeeds(Vector4::from_fn(|j, _| (u.0[j] * u.0[j] + delta[j]).max(MIN_SQUARED_SPEED).sqrt()))
}

/// `∂u/∂δ` of [`rotor_retract`] at `δ = 0`, per rotor.
pub fn rotor_tangent_scale(u: &RotorSpeeds) -> Vector4<f64> {
    u.0.map(|v| 0.5 / v.abs().max(MIN_SQUARED_SPEED.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManifoldValue {
    State(QuadState),
    Wrench(Wrench),
    Rotor(RotorSpeeds),
}

impl ManifoldValue {
    pub fn kind(&self) -> VariableKind {
        match self {
            ManifoldValue::State(_) => VariableKind::State,
            ManifoldValue::Wrench(_) => VariableKind::Wrench,
            ManifoldValue::Rotor(_) => VariableKind::Rotor,
        }
    }

    pub fn dim(&self) -> usize {
        self.kind().tangent_dim()
    }

    /// Applies a tangent increment: right perturbation on rotations, addition
    /// of squared speeds for rotors (see [`rotor_retract`]), vector addition
    /// everywhere else. `delta` must have length [`Self::dim`].
    pub fn retract(&self, delta: &[f64]) -> ManifoldValue {
        debug_assert_eq!(delta.len(), self.dim());
        match self {
            ManifoldValue::State(x) => ManifoldValue::State(x.retract(&Vector12::from_column_slice(delta))),
            ManifoldValue::Wrench(w) => {
                let d = Vector4::from_column_slice(delta);
                ManifoldValue::Wrench(Wrench::from_vector(&(w.as_vector() + d)))
            }
            ManifoldValue::Rotor(u) => ManifoldValue::Rotor(rotor_retract(u, delta)),
        }
    }

    /// `self ⊖ other`; panics if the kinds differ.
    pub fn local(&self, other: &ManifoldValue) -> DVector<f64> {
        match (self, other) {
            (ManifoldValue::State(a), ManifoldValue::State(b)) => DVector::from_column_slice(a.local(b).as_slice()),
            (ManifoldValue::Wrench(a), ManifoldValue::Wrench(b)) => {
                DVector::from_column_slice((a.as_vector() - b.as_vector()).as_slice())
            }
            (ManifoldValue::Rotor(a), ManifoldValue::Rotor(b)) => {
                DVector::from_column_slice((a.squared() - b.squared()).as_slice())
            }
            _ => panic!("local() between different variable kinds"),
        }
    }

    pub fn as_state(&self) -> &QuadState {
        match self {
            ManifoldValue::State(x) => x,
            other => panic!("expected a state, found {:?}", other.kind()),
        }
    }

    pub fn as_wrench(&self) -> &Wrench {
        match self {
            ManifoldValue::Wrench(w) => w,
            other => panic!("expected a wrench, found {:?}", other.kind()),
        }
    }

    pub fn as_rotor(&self) -> &RotorSpeeds {
        match self {
            ManifoldValue::Rotor(u) => u,
            other => panic!("expected rotor speeds, found {:?}", other.kind()),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            ManifoldValue::State(x) => x.is_finite(),
            ManifoldValue::Wrench(w) => w.as_vector().iter().all(|v| v.is_finite()),
            ManifoldValue::Rotor(u) => u.0.iter().all(|v| v.is_finite()),
        }
    }
}

/// Insertion-ordered map of variable values.
#[derive(Debug, Clone, Default)]
pub struct Values {
    keys: Vec<VariableKey>,
    values: Vec<ManifoldValue>,
    lookup: HashMap<VariableKey, usize>,
}

impl Values {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains(&self, key: &VariableKey) -> bool {
        self.lookup.contains_key(key)
    }

    /// Inserts or replaces; returns `true` when the key was new.
    pub fn insert(&mut self, key: VariableKey, value: ManifoldValue) -> bool {
        match self.lookup.get(&key) {
            Some(&i) => {
                self.values[i] = value;
                false
            }
            None => {
                self.lookup.insert(key, self.keys.len());
                self.keys.push(key);
                self.values.push(value);
                true
            }
        }
    }

    pub fn get(&self, key: &VariableKey) -> Option<&ManifoldValue> {
        self.lookup.get(key).map(|&i| &self.values[i])
    }

    pub fn position(&self, key: &VariableKey) -> Option<usize> {
        self.lookup.get(key).copied()
    }

    pub fn at(&self, i: usize) -> &ManifoldValue {
        &self.values[i]
    }

    pub(crate) fn at_mut(&mut self, i: usize) -> &mut ManifoldValue {
        &mut self.values[i]
    }

    pub fn state(&self, key: &VariableKey) -> Option<&QuadState> {
        match self.get(key)? {
            ManifoldValue::State(x) => Some(x),
            _ => None,
        }
    }

    pub fn wrench(&self, key: &VariableKey) -> Option<&Wrench> {
        match self.get(key)? {
            ManifoldValue::Wrench(w) => Some(w),
            _ => None,
        }
    }

    pub fn rotor(&self, key: &VariableKey) -> Option<&RotorSpeeds> {
        match self.get(key)? {
            ManifoldValue::Rotor(u) => Some(u),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VariableKey, &ManifoldValue)> {
        self.keys.iter().zip(self.values.iter())
    }

    pub fn keys(&self) -> &[VariableKey] {
        &self.keys
    }

    pub fn tangent_dim(&self) -> usize {
        self.values.iter().map(|v| v.dim()).sum()
    }
}
