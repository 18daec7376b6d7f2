//! Problem instances: locations, the asymmetric travel-energy matrix, station
//! candidacy and battery parameters.
//!
//! Instances are immutable once constructed. They can be produced by the
//! seeded generator ([`generate_instance`]) or read from the JSON instance
//! file described in `docs/instance-format.md`.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location<T> {
    pub id: usize,
    pub x: T,
    pub y: T,
    pub elevation: T,
}

/// Battery capacity, per-visit charge, soft-constraint reference level and
/// initial level, all in battery units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams<T> {
    pub q_max: T,
    pub q_charge: T,
    pub q_standard: T,
    pub q_init: T,
}

impl<T: Scalar> BatteryParams<T> {
    /// Q_max = 6, Q_charge = 3, Q_standard = 3, and Q_init = Q_standard.
    pub fn reference() -> Self {
        Self {
            q_max: lit(6.0),
            q_charge: lit(3.0),
            q_standard: lit(3.0),
            q_init: lit(3.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.q_max, self.q_charge, self.q_standard, self.q_init];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("battery parameters must be finite".into()));
        }
        if self.q_charge <= T::zero() {
            return Err(Error::Validation("q_charge must be positive".into()));
        }
        if self.q_standard < T::zero() || self.q_standard > self.q_max {
            return Err(Error::Validation("q_standard must lie in [0, q_max]".into()));
        }
        if self.q_init < T::zero() || self.q_init > self.q_max {
            return Err(Error::Validation("q_init must lie in [0, q_max]".into()));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for BatteryParams<T> {
    fn default() -> Self {
        Self::reference()
    }
}

/// Generator settings. Costs follow
/// `C_ij = distance_scale * |p_i - p_j| + elevation_scale * (h_j - h_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams<T> {
    pub n: usize,
    pub m: usize,
    pub start: usize,
    pub elevation_scale: T,
    pub distance_scale: T,
    pub seed: u64,
}

impl<T: Scalar> Default for GenParams<T> {
    fn default() -> Self {
        Self {
            n: 20,
            m: 16,
            start: 1,
            elevation_scale: T::one(),
            distance_scale: T::one(),
            seed: 0,
        }
    }
}

impl<T: Scalar> GenParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n = {} must be at least 2", self.n)));
        }
        if self.m > self.n {
            return Err(Error::InvalidParameter(format!(
                "m = {} exceeds n = {}",
                self.m, self.n
            )));
        }
        if self.start >= self.n {
            return Err(Error::InvalidParameter(format!(
                "start = {} out of range for n = {}",
                self.start, self.n
            )));
        }
        if !(self.distance_scale > T::zero()) || !self.distance_scale.is_finite() {
            return Err(Error::InvalidParameter("distance_scale must be positive".into()));
        }
        if !self.elevation_scale.is_finite() {
            return Err(Error::InvalidParameter("elevation_scale must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance<T> {
    locations: Vec<Location<T>>,
    cost: Vec<T>,
    candidates: Vec<usize>,
    start: usize,
    battery: BatteryParams<T>,
}

impl<T: Scalar> ProblemInstance<T> {
    /// Builds an instance from parts. `cost` is row-major `n x n`.
    pub fn new(
        locations: Vec<Location<T>>,
        cost: Vec<T>,
        candidates: Vec<usize>,
        start: usize,
        battery: BatteryParams<T>,
    ) -> Result<Self> {
        let inst = Self {
            locations,
            cost,
            candidates,
            start,
            battery,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        let n = self.locations.len();
        if n < 2 {
            return Err(Error::Validation(format!("instance needs at least 2 locations, got {n}")));
        }
        for (idx, loc) in self.locations.iter().enumerate() {
            if loc.id != idx {
                return Err(Error::Validation(format!(
                    "locations[{idx}].id = {} (ids must be 0..n-1 in order)",
                    loc.id
                )));
            }
            if !(loc.x.is_finite() && loc.y.is_finite() && loc.elevation.is_finite()) {
                return Err(Error::Validation(format!("locations[{idx}] has non-finite fields")));
            }
        }
        if self.cost.len() != n * n {
            return Err(Error::Validation(format!(
                "cost has {} entries, expected {}",
                self.cost.len(),
                n * n
            )));
        }
        if let Some(pos) = self.cost.iter().position(|c| !c.is_finite()) {
            return Err(Error::Validation(format!("cost[{}][{}] is not finite", pos / n, pos % n)));
        }
        if self.start >= n {
            return Err(Error::Validation(format!("start {} out of range", self.start)));
        }
        let mut seen = vec![false; n];
        for &c in &self.candidates {
            if c >= n {
                return Err(Error::Validation(format!("candidate {c} out of range")));
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::Validation(format!("candidate {c} listed twice")));
            }
        }
        self.battery.validate()
    }

    pub fn n(&self) -> usize {
        self.locations.len()
    }

    pub fn m(&self) -> usize {
        self.candidates.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn locations(&self) -> &[Location<T>] {
        &self.locations
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn battery(&self) -> &BatteryParams<T> {
        &self.battery
    }

    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> T {
        self.cost[i * self.n() + j]
    }

    /// Row-major cost matrix.
    pub fn cost_matrix(&self) -> &[T] {
        &self.cost
    }

    /// Largest `|C_ij|` over off-diagonal entries.
    pub fn max_abs_cost(&self) -> T {
        let n = self.n();
        let mut best = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    best = best.max(self.cost(i, j).abs());
                }
            }
        }
        best
    }

    /// Same instance with different battery parameters.
    pub fn with_battery(&self, battery: BatteryParams<T>) -> Result<Self> {
        battery.validate()?;
        Ok(Self {
            battery,
            ..self.clone()
        })
    }

    pub fn with_start(&self, start: usize) -> Result<Self> {
        Self::new(
            self.locations.clone(),
            self.cost.clone(),
            self.candidates.clone(),
            start,
            self.battery,
        )
    }
}

pub fn generate_instance<T: Scalar>(
    params: &GenParams<T>,
    battery: BatteryParams<T>,
) -> Result<ProblemInstance<T>> {
    params.validate()?;
    battery.validate()?;
    let n = params.n;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let locations: Vec<Location<T>> = (0..n)
        .map(|id| {
            let x = lit(rng.random::<f64>());
            let y = lit(rng.random::<f64>());
            let elevation = lit(rng.random::<f64>());
            Location { id, x, y, elevation }
        })
        .collect();

    let mut cost = vec![T::zero(); n * n];
    for a in &locations {
        for b in &locations {
            if a.id == b.id {
                continue;
            }
            let dist = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
            cost[a.id * n + b.id] =
                params.distance_scale * dist + params.elevation_scale * (b.elevation - a.elevation);
        }
    }

    // Low ground is eligible for stations; ties go to the lower id.
    let mut by_elevation: Vec<usize> = (0..n).collect();
    by_elevation.sort_by(|&a, &b| {
        locations[a]
            .elevation
            .partial_cmp(&locations[b].elevation)
            .expect("finite elevations")
            .then(a.cmp(&b))
    });
    let mut candidates: Vec<usize> = by_elevation[..params.m].to_vec();
    candidates.sort_unstable();

    ProblemInstance::new(locations, cost, candidates, params.start, battery)
}

/// On-disk layout of an instance file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile<T> {
    n: usize,
    m: usize,
    start: usize,
    battery: BatteryParams<T>,
    locations: Vec<Location<T>>,
    candidates: Vec<usize>,
    cost: Vec<Vec<T>>,
}

pub fn save_instance<T: Scalar, W: Write>(inst: &ProblemInstance<T>, sink: W) -> Result<()> {
    let n = inst.n();
    let file = InstanceFile {
        n,
        m: inst.m(),
        start: inst.start,
        battery: inst.battery,
        locations: inst.locations.clone(),
        candidates: inst.candidates.clone(),
        cost: inst.cost.chunks(n).map(<[T]>::to_vec).collect(),
    };
    serde_json::to_writer_pretty(sink, &file).map_err(|e| Error::Io(e.into()))
}

pub fn load_instance<T: Scalar, R: Read>(mut source: R) -> Result<ProblemInstance<T>> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    parse_instance(&text)
}

pub fn parse_instance<T: Scalar>(text: &str) -> Result<ProblemInstance<T>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: InstanceFile<T> = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;

    // JSON has no NaN/inf tokens, but narrowing to f32 can still overflow.
    let non_finite = |field: String| Error::Parse {
        field,
        message: "value is not finite".into(),
    };
    for (i, row) in file.cost.iter().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(non_finite(format!("cost[{i}][{j}]")));
        }
    }
    for (i, loc) in file.locations.iter().enumerate() {
        if !(loc.x.is_finite() && loc.y.is_finite() && loc.elevation.is_finite()) {
            return Err(non_finite(format!("locations[{i}]")));
        }
    }

    let n = file.n;
    if file.locations.len() != n {
        return Err(Error::Validation(format!(
            "declared n = {n} but {} locations listed",
            file.locations.len()
        )));
    }
    if file.candidates.len() != file.m {
        return Err(Error::Validation(format!(
            "declared m = {} but {} candidates listed",
            file.m,
            file.candidates.len()
        )));
    }
    if file.cost.len() != n || file.cost.iter().any(|row| row.len() != n) {
        return Err(Error::Validation(format!("cost must be a {n} x {n} matrix")));
    }
    let cost = file.cost.into_iter().flatten().collect();
    ProblemInstance::new(file.locations, cost, file.candidates, file.start, file.battery)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(n: usize, m: usize, seed: u64) -> ProblemInstance<f64> {
        let params = GenParams {
            n,
            m,
            start: 0,
            seed,
            ..GenParams::default()
        };
        generate_instance(&params, BatteryParams::reference()).unwrap()
    }

    #[test]
    fn twenty_location_instance_has_four_ineligible_locations() {
        let inst = gen(20, 16, 3);
        assert_eq!(inst.n(), 20);
        assert_eq!(inst.m(), 16);
        let ineligible = (0..20).filter(|i| !inst.candidates().contains(i)).count();
        assert_eq!(ineligible, 4);
    }

    #[test]
    fn zero_elevation_scale_gives_symmetric_costs() {
        let params = GenParams {
            n: 9,
            m: 4,
            start: 0,
            elevation_scale: 0.0,
            ..GenParams::default()
        };
        let inst = generate_instance(&params, BatteryParams::reference()).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(inst.cost(i, j), inst.cost(j, i));
            }
        }
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(gen(5, 3, 7), gen(5, 3, 7));
        assert_ne!(gen(5, 3, 7), gen(5, 3, 8));
    }

    #[test]
    fn too_many_candidates_is_rejected() {
        let params = GenParams::<f64> {
            n: 4,
            m: 5,
            start: 0,
            ..GenParams::default()
        };
        assert!(matches!(
            generate_instance(&params, BatteryParams::reference()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn generated_costs_include_regeneration() {
        let inst = gen(20, 16, 11);
        assert!(inst.cost_matrix().iter().any(|&c| c < 0.0));
    }

    #[test]
    fn candidates_are_lowest_elevations() {
        let inst = gen(12, 5, 4);
        let mut ids: Vec<usize> = (0..12).collect();
        ids.sort_by(|&a, &b| {
            let (ea, eb) = (inst.locations()[a].elevation, inst.locations()[b].elevation);
            ea.partial_cmp(&eb).unwrap().then(a.cmp(&b))
        });
        let mut lowest = ids[..5].to_vec();
        lowest.sort_unstable();
        assert_eq!(inst.candidates(), &lowest[..]);
    }

    #[test]
    fn round_trip_preserves_instance() {
        let inst = gen(7, 4, 21);
        let mut buf = Vec::new();
        save_instance(&inst, &mut buf).unwrap();
        let back: ProblemInstance<f64> = load_instance(&buf[..]).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn candidate_count_mismatch_is_a_validation_error() {
        let inst = gen(5, 3, 1);
        let mut buf = Vec::new();
        save_instance(&inst, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\"m\": 3", "\"m\": 2");
        let err = parse_instance::<f64>(&text).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn non_finite_cost_is_a_parse_error() {
        let inst = gen(3, 2, 1);
        let mut buf = Vec::new();
        save_instance(&inst, &mut buf).unwrap();
        let mut value: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        value["cost"][1][2] = serde_json::Value::String("NaN".into());
        let err = parse_instance::<f64>(&value.to_string()).unwrap_err();
        match err {
            Error::Parse { field, .. } => assert_eq!(field, "cost[1][2]"),
            other => panic!("unexpected {other}"),
        }
        // Overflow when narrowing to f32 is caught after deserialization.
        let text = String::from_utf8(buf).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["cost"][0][1] = serde_json::json!(1e300);
        match parse_instance::<f32>(&value.to_string()).unwrap_err() {
            Error::Parse { field, .. } => assert_eq!(field, "cost[0][1]"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn battery_invariants_are_enforced() {
        let mut b = BatteryParams::<f64>::reference();
        b.q_standard = 7.0;
        assert!(b.validate().is_err());
        let mut b = BatteryParams::<f64>::reference();
        b.q_charge = 0.0;
        assert!(b.validate().is_err());
    }
}
