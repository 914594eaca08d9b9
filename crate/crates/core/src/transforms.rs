//! Action transformations and the named transformation families.
//!
//! A transformation `φ` maps each action to a distribution over actions. It is
//! stored as a column-stochastic `|A| × |A|` matrix whose column `a` is `φ(a)`,
//! which is also the matrix of the linear extension `[φ]` to mixed actions.

use std::fmt;

use crate::odp::{MixedAction, SIMPLEX_TOLERANCE};
use crate::{Error, Result};

/// Largest action count for which the swap family is enumerated (`6^6 = 46656` members).
pub const SWAP_ENUMERATION_CAP: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Transformation {
    num_actions: usize,
    /// Column-major: entries `[a * n, (a + 1) * n)` hold `φ(a)`.
    columns: Vec<f64>,
    /// `Some(map)` when every column is a point mass, `φ(a) = δ_{map[a]}`.
    targets: Option<Vec<usize>>,
}

impl Transformation {
    /// Pure transformation sending action `a` to `targets[a]`.
    pub fn from_targets(targets: Vec<usize>) -> Result<Self> {
        let n = targets.len();
        if n == 0 {
            return Err(Error::invalid("transformation", "no actions"));
        }
        if let Some(&bad) = targets.iter().find(|&&b| b >= n) {
            return Err(Error::invalid(
                "transformation",
                format!("target {bad} out of range for {n} actions"),
            ));
        }
        let mut columns = vec![0.0; n * n];
        for (a, &b) in targets.iter().enumerate() {
            columns[a * n + b] = 1.0;
        }
        Ok(Self {
            num_actions: n,
            columns,
            targets: Some(targets),
        })
    }

    /// General transformation from its columns `φ(a)`.
    pub fn from_columns(columns: &[MixedAction]) -> Result<Self> {
        let n = columns.len();
        if n == 0 {
            return Err(Error::invalid("transformation", "no actions"));
        }
        let mut dense = Vec::with_capacity(n * n);
        for col in columns {
            Error::check_len("transformation column", n, col.len())?;
            dense.extend_from_slice(col.probs());
        }
        let targets = columns
            .iter()
            .map(|col| {
                let probs = col.probs();
                probs
                    .iter()
                    .position(|&p| p == 1.0)
                    .filter(|_| probs.iter().filter(|&&p| p != 0.0).count() == 1)
            })
            .collect::<Option<Vec<_>>>();
        Ok(Self {
            num_actions: n,
            columns: dense,
            targets,
        })
    }

    pub fn identity(num_actions: usize) -> Self {
        Self::from_targets((0..num_actions).collect()).expect("identity is well formed")
    }

    /// The external transformation `x ↦ δ_target`.
    pub fn constant(num_actions: usize, target: usize) -> Result<Self> {
        Self::from_targets(vec![target; num_actions])
    }

    /// The internal transformation moving `from` to `to` and fixing everything else.
    pub fn internal(num_actions: usize, from: usize, to: usize) -> Result<Self> {
        if from >= num_actions {
            return Err(Error::invalid(
                "transformation",
                format!("source {from} out of range"),
            ));
        }
        let mut targets: Vec<usize> = (0..num_actions).collect();
        targets[from] = to;
        Self::from_targets(targets)
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// `φ(a)` as a probability vector.
    pub fn column(&self, a: usize) -> &[f64] {
        let n = self.num_actions;
        &self.columns[a * n..(a + 1) * n]
    }

    pub fn targets(&self) -> Option<&[usize]> {
        self.targets.as_deref()
    }

    /// Whether `φ(a) ≠ δ_a`.
    pub fn moves(&self, a: usize) -> bool {
        match &self.targets {
            Some(t) => t[a] != a,
            None => self
                .column(a)
                .iter()
                .enumerate()
                .any(|(s, &p)| p != if s == a { 1.0 } else { 0.0 }),
        }
    }

    /// `E_{s∼φ(a)}[r(s)]`.
    pub fn expected_value(&self, a: usize, values: &[f64]) -> f64 {
        match &self.targets {
            Some(t) => values[t[a]],
            None => self
                .column(a)
                .iter()
                .zip(values)
                .map(|(p, v)| p * v)
                .sum(),
        }
    }

    /// `[φ](q) = Σ_a q(a) φ(a)`.
    pub fn apply_linear(&self, q: &MixedAction) -> Result<MixedAction> {
        let n = self.num_actions;
        Error::check_len("apply_linear", n, q.len())?;
        let mut out = vec![0.0; n];
        for (a, &qa) in q.probs().iter().enumerate() {
            if qa == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.column(a)) {
                *o += qa * p;
            }
        }
        MixedAction::new(out)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_actions;
        for a in 0..n {
            let col = self.column(a);
            let total: f64 = col.iter().sum();
            if col.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Error::invalid(
                    "transformation",
                    format!("column {a} is not a distribution"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    External,
    Internal,
    Swap,
    Custom,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::External => "ext",
            FamilyKind::Internal => "int",
            FamilyKind::Swap => "swap",
            FamilyKind::Custom => "custom",
        }
    }

    /// Closed-form member count for the named kinds.
    pub fn cardinality(self, num_actions: usize) -> Option<usize> {
        let n = num_actions;
        match self {
            FamilyKind::External => Some(n),
            FamilyKind::Internal => Some(n * n - n + 1),
            FamilyKind::Swap => u32::try_from(n).ok().and_then(|e| n.checked_pow(e)),
            FamilyKind::Custom => None,
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An ordered, immutable set of transformations over one action set.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformationFamily {
    kind: FamilyKind,
    num_actions: usize,
    members: Vec<Transformation>,
}

impl TransformationFamily {
    /// Enumerates a named family in canonical order.
    ///
    /// * external: `δ_0, δ_1, …` by target.
    /// * internal: the identity, then `(a → b)` for `a ≠ b` in lexicographic order.
    /// * swap: every map `A → A` in base-`|A|` numeral order, `φ(0)` most significant.
    pub fn build(kind: FamilyKind, num_actions: usize) -> Result<Self> {
        let n = num_actions;
        if n < 2 {
            return Err(Error::invalid(
                "family",
                format!("need at least 2 actions, got {n}"),
            ));
        }
        let members = match kind {
            FamilyKind::External => (0..n)
                .map(|y| Transformation::constant(n, y))
                .collect::<Result<Vec<_>>>()?,
            FamilyKind::Internal => {
                let mut members = vec![Transformation::identity(n)];
                for a in 0..n {
                    for b in (0..n).filter(|&b| b != a) {
                        members.push(Transformation::internal(n, a, b)?);
                    }
                }
                members
            }
            FamilyKind::Swap => {
                if n > SWAP_ENUMERATION_CAP {
                    return Err(Error::Capacity {
                        kind: "swap",
                        num_actions: n,
                        cap: SWAP_ENUMERATION_CAP,
                    });
                }
                let count = n.pow(n as u32);
                (0..count)
                    .map(|code| {
                        let mut targets = vec![0; n];
                        let mut rest = code;
                        for slot in targets.iter_mut().rev() {
                            *slot = rest % n;
                            rest /= n;
                        }
                        Transformation::from_targets(targets)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            FamilyKind::Custom => {
                return Err(Error::invalid(
                    "family",
                    "custom families are built with TransformationFamily::custom",
                ))
            }
        };
        Ok(Self {
            kind,
            num_actions: n,
            members,
        })
    }

    pub fn custom(members: Vec<Transformation>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::invalid("family", "no members"))?;
        let n = first.num_actions();
        for m in &members {
            Error::check_len("family member", n, m.num_actions())?;
            m.validate()?;
        }
        Ok(Self {
            kind: FamilyKind::Custom,
            num_actions: n,
            members,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Transformation] {
        &self.members
    }

    pub fn contains(&self, phi: &Transformation) -> bool {
        self.members.iter().any(|m| m.columns == phi.columns)
    }

    /// `μ(Φ)`: the largest number of members that move any single action.
    pub fn maximal_activation(&self) -> usize {
        (0..self.num_actions)
            .map(|a| self.members.iter().filter(|m| m.moves(a)).count())
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_apply(phi: &Transformation, q: &[f64]) -> Vec<f64> {
        let n = phi.num_actions();
        (0..n)
            .map(|row| (0..n).map(|col| phi.column(col)[row] * q[col]).sum())
            .collect()
    }

    #[test]
    fn external_members_are_constants() {
        let fam = TransformationFamily::build(FamilyKind::External, 3).unwrap();
        assert_eq!(fam.len(), 3);
        for (y, m) in fam.members().iter().enumerate() {
            assert_eq!(m.targets().unwrap(), &[y, y, y]);
        }
    }

    #[test]
    fn named_cardinalities() {
        assert_eq!(TransformationFamily::build(FamilyKind::Internal, 3).unwrap().len(), 7);
        let swap = TransformationFamily::build(FamilyKind::Swap, 2).unwrap();
        let maps: Vec<_> = swap.members().iter().map(|m| m.targets().unwrap().to_vec()).collect();
        assert_eq!(maps, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        for n in 2..=6 {
            for kind in [FamilyKind::External, FamilyKind::Internal, FamilyKind::Swap] {
                let fam = TransformationFamily::build(kind, n).unwrap();
                assert_eq!(Some(fam.len()), kind.cardinality(n), "{kind} {n}");
            }
        }
    }

    #[test]
    fn internal_canonical_order() {
        let fam = TransformationFamily::build(FamilyKind::Internal, 3).unwrap();
        let maps: Vec<_> = fam.members().iter().map(|m| m.targets().unwrap().to_vec()).collect();
        assert_eq!(maps[0], vec![0, 1, 2]);
        assert_eq!(maps[1], vec![1, 1, 2]); // 0 -> 1
        assert_eq!(maps[2], vec![2, 1, 2]); // 0 -> 2
        assert_eq!(maps[3], vec![0, 0, 2]); // 1 -> 0
        assert_eq!(maps[6], vec![0, 1, 1]); // 2 -> 1
    }

    #[test]
    fn swap_cap_enforced() {
        assert!(matches!(
            TransformationFamily::build(FamilyKind::Swap, 7),
            Err(Error::Capacity { .. })
        ));
        assert!(TransformationFamily::build(FamilyKind::External, 1).is_err());
    }

    #[test]
    fn named_families_are_pure_and_nested() {
        for n in 2..=4 {
            let swap = TransformationFamily::build(FamilyKind::Swap, n).unwrap();
            for kind in [FamilyKind::External, FamilyKind::Internal] {
                let fam = TransformationFamily::build(kind, n).unwrap();
                for m in fam.members() {
                    assert!(m.targets().is_some());
                    assert!(swap.contains(m));
                }
            }
            assert!(swap.members().iter().all(|m| m.targets().is_some()));
        }
    }

    #[test]
    fn linear_extension_examples() {
        let q = MixedAction::new(vec![0.6, 0.4]).unwrap();
        assert_eq!(Transformation::identity(2).apply_linear(&q).unwrap(), q);
        let c = Transformation::constant(2, 1).unwrap();
        assert_eq!(c.apply_linear(&q).unwrap(), MixedAction::point(2, 1));
        // with two actions, internal (0 -> 1) collapses everything onto action 1
        let phi = Transformation::internal(2, 0, 1).unwrap();
        assert_eq!(phi.apply_linear(&q).unwrap().probs(), &dense_apply(&phi, q.probs())[..]);
        assert_eq!(phi.apply_linear(&q).unwrap(), MixedAction::point(2, 1));
        assert!(phi.apply_linear(&MixedAction::uniform(3)).is_err());
    }

    #[test]
    fn maximal_activation_examples() {
        let ext = TransformationFamily::build(FamilyKind::External, 4).unwrap();
        assert_eq!(ext.maximal_activation(), 3);
        let id = TransformationFamily::custom(vec![Transformation::identity(3)]).unwrap();
        assert_eq!(id.maximal_activation(), 0);
        // brute force: for each action count the internal members that move it
        let int = TransformationFamily::build(FamilyKind::Internal, 3).unwrap();
        let mut per_action = [0usize; 3];
        for m in int.members() {
            for (a, &b) in m.targets().unwrap().iter().enumerate() {
                if a != b {
                    per_action[a] += 1;
                }
            }
        }
        assert_eq!(per_action, [2, 2, 2]);
        assert_eq!(int.maximal_activation(), 2);
    }

    #[test]
    fn custom_columns_detect_purity() {
        let cols = vec![
            MixedAction::new(vec![0.5, 0.5]).unwrap(),
            MixedAction::point(2, 1),
        ];
        let phi = Transformation::from_columns(&cols).unwrap();
        assert!(phi.targets().is_none());
        assert!(phi.moves(0));
        assert!(!phi.moves(1));
        assert!((phi.expected_value(0, &[1.0, 0.0]) - 0.5).abs() < 1e-15);
        let pure = Transformation::from_columns(&[MixedAction::point(2, 1), MixedAction::point(2, 1)]).unwrap();
        assert_eq!(pure.targets(), Some(&[1usize, 1][..]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.0f64..1.0, n).prop_map(|mut v| {
                v[0] += 1e-3;
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
                v
            })
        }

        fn transformation_and_q() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
            (2usize..=5).prop_flat_map(|n| (prop::collection::vec(distribution(n), n), distribution(n)))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn apply_linear_matches_matrix_product((cols, q) in transformation_and_q()) {
                let cols: Vec<_> = cols.into_iter().map(|c| MixedAction::new(c).unwrap()).collect();
                let phi = Transformation::from_columns(&cols).unwrap();
                let out = phi.apply_linear(&MixedAction::new(q.clone()).unwrap()).unwrap();
                for (a, b) in out.probs().iter().zip(dense_apply(&phi, &q)) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }
}
