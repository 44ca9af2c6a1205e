//! Minimum-bin packing and calorie-budgeted menu planning.
//!
//! [`pack_min_bins`] is the classic unit-capacity formulation. The menu planner
//! treats the four meal slots as bins with lower and upper calorie limits and
//! fills them with the best-scored foods.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_io::{FoodItem, MealSlot};

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("item {index} has weight {weight}, outside (0, {capacity}]")]
    ItemExceedsCapacity {
        index: usize,
        weight: f64,
        capacity: f64,
    },
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("no feasible menu: {}", .0.join("; "))]
    InfeasiblePlan(Vec<String>),
}

pub type Result<T, E = PlanError> = std::result::Result<T, E>;

const EPS: f64 = 1e-9;

// ---------------------------------------------------------------------------
// minimum-bin packing

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingInstance {
    pub weights: Vec<f64>,
    pub capacity: f64,
}

impl PackingInstance {
    pub fn unit(weights: Vec<f64>) -> Self {
        Self {
            weights,
            capacity: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        for (i, &w) in self.weights.iter().enumerate() {
            if !(w > 0.0 && w <= self.capacity + EPS) {
                return Err(PlanError::ItemExceedsCapacity {
                    index: i,
                    weight: w,
                    capacity: self.capacity,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinAssignment {
    /// Bin index of each item.
    pub assignment: Vec<usize>,
    /// Items per bin.
    pub bins: Vec<Vec<usize>>,
    pub loads: Vec<f64>,
    /// Proven minimal.
    pub exact: bool,
}

impl BinAssignment {
    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    fn from_assignment(weights: &[f64], assignment: Vec<usize>, exact: bool) -> Self {
        let z = assignment.iter().map(|b| b + 1).max().unwrap_or(0);
        let mut bins = vec![Vec::new(); z];
        let mut loads = vec![0.0; z];
        for (i, &b) in assignment.iter().enumerate() {
            bins[b].push(i);
            loads[b] += weights[i];
        }
        Self {
            assignment,
            bins,
            loads,
            exact,
        }
    }
}

/// Largest instance solved exactly by [`pack_min_bins`].
pub const EXACT_PACKING_LIMIT: usize = 12;

fn decreasing_order(w: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| {
        w[b].partial_cmp(&w[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// First-fit decreasing.
pub fn first_fit_decreasing(inst: &PackingInstance) -> Result<BinAssignment> {
    inst.validate()?;
    let w = &inst.weights;
    let mut loads: Vec<f64> = Vec::new();
    let mut assignment = vec![0; w.len()];
    for i in decreasing_order(w) {
        match loads.iter().position(|l| l + w[i] <= inst.capacity + EPS) {
            Some(b) => {
                loads[b] += w[i];
                assignment[i] = b;
            }
            None => {
                assignment[i] = loads.len();
                loads.push(w[i]);
            }
        }
    }
    Ok(BinAssignment::from_assignment(w, assignment, false))
}

struct BranchAndBound<'a> {
    w: &'a [f64],
    order: Vec<usize>,
    suffix: Vec<f64>,
    cap: f64,
    loads: Vec<f64>,
    current: Vec<usize>,
    best: Vec<usize>,
    best_count: usize,
    lower: usize,
}

impl BranchAndBound<'_> {
    fn search(&mut self, k: usize) {
        if self.best_count == self.lower {
            return;
        }
        if k == self.order.len() {
            if self.loads.len() < self.best_count {
                self.best_count = self.loads.len();
                self.best = self.current.clone();
            }
            return;
        }
        // remaining volume that does not fit in the open bins' free space
        let free: f64 = self.loads.iter().map(|l| self.cap - l).sum();
        let extra = ((self.suffix[k] - free) / self.cap - EPS).ceil().max(0.0) as usize;
        if self.loads.len() + extra >= self.best_count {
            return;
        }
        let item = self.order[k];
        let wi = self.w[item];
        let mut tried: Vec<f64> = Vec::new();
        for b in 0..self.loads.len() {
            let l = self.loads[b];
            if l + wi > self.cap + EPS || tried.iter().any(|t| (t - l).abs() <= EPS) {
                continue;
            }
            tried.push(l);
            self.loads[b] += wi;
            self.current[item] = b;
            self.search(k + 1);
            self.loads[b] -= wi;
        }
        if self.loads.len() + 1 < self.best_count {
            self.loads.push(wi);
            self.current[item] = self.loads.len() - 1;
            self.search(k + 1);
            self.loads.pop();
        }
    }
}

/// Optimal packing by depth-first branch and bound, seeded with FFD.
pub fn exact_min_bins(inst: &PackingInstance) -> Result<BinAssignment> {
    let ffd = first_fit_decreasing(inst)?;
    let w = &inst.weights;
    let total: f64 = w.iter().sum();
    let lower = ((total / inst.capacity) - EPS).ceil().max(0.0) as usize;
    if ffd.bin_count() <= lower {
        return Ok(BinAssignment { exact: true, ..ffd });
    }
    let order = decreasing_order(w);
    let mut suffix = vec![0.0; w.len() + 1];
    for k in (0..w.len()).rev() {
        suffix[k] = suffix[k + 1] + w[order[k]];
    }
    let mut bb = BranchAndBound {
        w,
        order,
        suffix,
        cap: inst.capacity,
        loads: Vec::new(),
        current: vec![0; w.len()],
        best: ffd.assignment.clone(),
        best_count: ffd.bin_count(),
        lower,
    };
    bb.search(0);
    // relabel bins in order of first appearance
    let mut map = std::collections::HashMap::new();
    let assignment = bb
        .best
        .iter()
        .map(|b| {
            let next = map.len();
            *map.entry(*b).or_insert(next)
        })
        .collect();
    Ok(BinAssignment::from_assignment(w, assignment, true))
}

/// Minimum number of unit bins: exact up to [`EXACT_PACKING_LIMIT`] items,
/// first-fit decreasing beyond.
pub fn pack_min_bins(inst: &PackingInstance) -> Result<BinAssignment> {
    if inst.weights.len() <= EXACT_PACKING_LIMIT {
        exact_min_bins(inst)
    } else {
        first_fit_decreasing(inst)
    }
}

// ---------------------------------------------------------------------------
// menu planning

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MealBudget {
    pub slot: MealSlot,
    pub min_kcal: f64,
    pub max_kcal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DayBudget {
    /// One budget per slot, in [`MealSlot::ALL`] order.
    pub meals: [MealBudget; 4],
    pub total_min_kcal: f64,
    pub total_max_kcal: f64,
}

impl Default for DayBudget {
    fn default() -> Self {
        let m = |slot, min_kcal, max_kcal| MealBudget {
            slot,
            min_kcal,
            max_kcal,
        };
        Self {
            meals: [
                m(MealSlot::Breakfast, 300.0, 400.0),
                m(MealSlot::Lunch, 500.0, 700.0),
                m(MealSlot::Dinner, 500.0, 700.0),
                m(MealSlot::Snacks, 0.0, 200.0),
            ],
            total_min_kcal: 1500.0,
            total_max_kcal: 2000.0,
        }
    }
}

impl DayBudget {
    pub fn meal(&self, slot: MealSlot) -> &MealBudget {
        &self.meals[slot.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for (k, m) in self.meals.iter().enumerate() {
            if m.slot != MealSlot::ALL[k] {
                return Err(PlanError::InvalidBudget(format!(
                    "budget {k} is for {}, expected {}",
                    m.slot,
                    MealSlot::ALL[k]
                )));
            }
            if !(m.min_kcal >= 0.0 && m.min_kcal <= m.max_kcal) {
                return Err(PlanError::InvalidBudget(format!(
                    "{}: need 0 <= min ({}) <= max ({})",
                    m.slot, m.min_kcal, m.max_kcal
                )));
            }
        }
        if !(self.total_min_kcal >= 0.0 && self.total_min_kcal <= self.total_max_kcal) {
            return Err(PlanError::InvalidBudget(format!(
                "day: need 0 <= min ({}) <= max ({})",
                self.total_min_kcal, self.total_max_kcal
            )));
        }
        let min_sum: f64 = self.meals.iter().map(|m| m.min_kcal).sum();
        if min_sum > self.total_max_kcal {
            return Err(PlanError::InvalidBudget(format!(
                "slot minimums add up to {min_sum}, above the day maximum {}",
                self.total_max_kcal
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedFood {
    pub food: FoodItem,
    pub kcal: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotPlan {
    pub slot: MealSlot,
    pub items: Vec<PlannedFood>,
}

impl SlotPlan {
    pub fn subtotal(&self) -> f64 {
        self.items.iter().map(|f| f.kcal).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealPlan {
    /// In [`MealSlot::ALL`] order.
    pub slots: Vec<SlotPlan>,
}

impl MealPlan {
    /// Builds a plan from explicit slot contents, e.g. a published menu.
    pub fn from_slots(slots: Vec<(MealSlot, Vec<PlannedFood>)>) -> Self {
        let mut out: Vec<SlotPlan> = MealSlot::ALL
            .iter()
            .map(|&slot| SlotPlan {
                slot,
                items: Vec::new(),
            })
            .collect();
        for (slot, items) in slots {
            out[slot.index()].items.extend(items);
        }
        Self { slots: out }
    }

    pub fn slot(&self, slot: MealSlot) -> &SlotPlan {
        &self.slots[slot.index()]
    }

    pub fn day_total(&self) -> f64 {
        self.slots.iter().map(SlotPlan::subtotal).sum()
    }

    /// Sum of the preference scores of the chosen foods.
    pub fn objective(&self) -> f64 {
        self.slots
            .iter()
            .flat_map(|s| &s.items)
            .map(|f| f.score)
            .sum()
    }

    pub fn food_count(&self) -> usize {
        self.slots.iter().map(|s| s.items.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    SlotBelowMin { slot: MealSlot, kcal: f64, min: f64 },
    SlotAboveMax { slot: MealSlot, kcal: f64, max: f64 },
    DayBelowMin { kcal: f64, min: f64 },
    DayAboveMax { kcal: f64, max: f64 },
    DuplicateFood { food_id: String },
    SlotNotAllowed { food_id: String, slot: MealSlot },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SlotBelowMin { slot, kcal, min } => {
                write!(f, "{slot} < {min} ({kcal} kcal)")
            }
            Violation::SlotAboveMax { slot, kcal, max } => {
                write!(f, "{slot} > {max} ({kcal} kcal)")
            }
            Violation::DayBelowMin { kcal, min } => write!(f, "day < {min} ({kcal} kcal)"),
            Violation::DayAboveMax { kcal, max } => write!(f, "day > {max} ({kcal} kcal)"),
            Violation::DuplicateFood { food_id } => {
                write!(f, "food `{food_id}` appears more than once")
            }
            Violation::SlotNotAllowed { food_id, slot } => {
                write!(f, "food `{food_id}` is not allowed at {slot}")
            }
        }
    }
}

/// Every constraint the plan breaks; empty iff the plan is valid.
pub fn validate_plan(plan: &MealPlan, budget: &DayBudget) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in &plan.slots {
        let b = budget.meal(s.slot);
        let kcal = s.subtotal();
        if kcal < b.min_kcal - EPS {
            out.push(Violation::SlotBelowMin {
                slot: s.slot,
                kcal,
                min: b.min_kcal,
            });
        }
        if kcal > b.max_kcal + EPS {
            out.push(Violation::SlotAboveMax {
                slot: s.slot,
                kcal,
                max: b.max_kcal,
            });
        }
    }
    let day = plan.day_total();
    if day < budget.total_min_kcal - EPS {
        out.push(Violation::DayBelowMin {
            kcal: day,
            min: budget.total_min_kcal,
        });
    }
    if day > budget.total_max_kcal + EPS {
        out.push(Violation::DayAboveMax {
            kcal: day,
            max: budget.total_max_kcal,
        });
    }
    let mut seen = HashSet::new();
    for s in &plan.slots {
        for f in &s.items {
            if !seen.insert(f.food.id.as_str()) {
                out.push(Violation::DuplicateFood {
                    food_id: f.food.id.clone(),
                });
            }
            if !f.food.allows(s.slot) {
                out.push(Violation::SlotNotAllowed {
                    food_id: f.food.id.clone(),
                    slot: s.slot,
                });
            }
        }
    }
    out
}

/// Candidates sorted by descending score, ties by food id.
fn ranked(foods: &[(FoodItem, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..foods.len()).collect();
    order.sort_by(|&a, &b| {
        foods[b]
            .1
            .partial_cmp(&foods[a].1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| foods[a].0.id.cmp(&foods[b].0.id))
    });
    order
}

/// Working state: slot of each candidate (or none) and running totals.
struct Packing<'a> {
    foods: &'a [(FoodItem, f64)],
    budget: &'a DayBudget,
    slot_of: Vec<Option<MealSlot>>,
    load: [f64; 4],
}

impl<'a> Packing<'a> {
    fn new(foods: &'a [(FoodItem, f64)], budget: &'a DayBudget) -> Self {
        Self {
            foods,
            budget,
            slot_of: vec![None; foods.len()],
            load: [0.0; 4],
        }
    }

    fn day(&self) -> f64 {
        self.load.iter().sum()
    }

    fn fits(&self, i: usize, slot: MealSlot) -> bool {
        let (food, _) = &self.foods[i];
        let kcal = food.calories;
        food.allows(slot)
            && self.load[slot.index()] + kcal <= self.budget.meal(slot).max_kcal + EPS
            && self.day() + kcal <= self.budget.total_max_kcal + EPS
    }

    fn place(&mut self, i: usize, slot: MealSlot) {
        self.slot_of[i] = Some(slot);
        self.load[slot.index()] += self.foods[i].0.calories;
    }

    fn remove(&mut self, i: usize) -> Option<MealSlot> {
        let s = self.slot_of[i].take()?;
        self.load[s.index()] -= self.foods[i].0.calories;
        Some(s)
    }

    fn feasible(&self) -> bool {
        let day = self.day();
        self.budget.meals.iter().all(|m| {
            let l = self.load[m.slot.index()];
            l >= m.min_kcal - EPS && l <= m.max_kcal + EPS
        }) && day >= self.budget.total_min_kcal - EPS
            && day <= self.budget.total_max_kcal + EPS
    }

    fn shortfalls(&self) -> Vec<String> {
        let mut out = Vec::new();
        for m in &self.budget.meals {
            let l = self.load[m.slot.index()];
            if l < m.min_kcal - EPS {
                out.push(format!(
                    "{} short by {} kcal",
                    m.slot,
                    fmt_kcal(m.min_kcal - l)
                ));
            }
        }
        if self.day() < self.budget.total_min_kcal - EPS {
            out.push(format!(
                "day short by {} kcal",
                fmt_kcal(self.budget.total_min_kcal - self.day())
            ));
        }
        out
    }

    fn into_plan(self) -> MealPlan {
        let mut slots: Vec<SlotPlan> = MealSlot::ALL
            .iter()
            .map(|&slot| SlotPlan {
                slot,
                items: Vec::new(),
            })
            .collect();
        for i in ranked(self.foods) {
            if let Some(s) = self.slot_of[i] {
                let (food, score) = &self.foods[i];
                slots[s.index()].items.push(PlannedFood {
                    food: food.clone(),
                    kcal: food.calories,
                    score: *score,
                });
            }
        }
        MealPlan { slots }
    }
}

/// Greedy placement by score, then a repair pass with the lowest-scored
/// fillers. Returns the shortfall diagnosis if the result is not feasible.
fn greedy<'a>(
    foods: &'a [(FoodItem, f64)],
    budget: &'a DayBudget,
) -> std::result::Result<Packing<'a>, Vec<String>> {
    let mut p = Packing::new(foods, budget);
    let order = ranked(foods);
    // first pass: best foods up to each slot's minimum, so that high scorers
    // are spread over the slots instead of crowding one of them
    for &i in &order {
        let slot = MealSlot::ALL
            .iter()
            .copied()
            .filter(|&s| p.load[s.index()] < budget.meal(s).min_kcal - EPS && p.fits(i, s))
            .max_by(|&a, &b| {
                let ra = budget.meal(a).max_kcal - p.load[a.index()];
                let rb = budget.meal(b).max_kcal - p.load[b.index()];
                ra.partial_cmp(&rb)
                    .unwrap_or(Ordering::Equal)
                    .then(b.cmp(&a))
            });
        if let Some(s) = slot {
            p.place(i, s);
        }
    }
    // second pass: remaining foods by score into the roomiest feasible slot
    for &i in &order {
        if p.slot_of[i].is_some() {
            continue;
        }
        let slot = MealSlot::ALL
            .iter()
            .copied()
            .filter(|&s| p.fits(i, s))
            .max_by(|&a, &b| {
                let ra = budget.meal(a).max_kcal - p.load[a.index()];
                let rb = budget.meal(b).max_kcal - p.load[b.index()];
                ra.partial_cmp(&rb)
                    .unwrap_or(Ordering::Equal)
                    .then(b.cmp(&a))
            });
        if let Some(s) = slot {
            p.place(i, s);
        }
    }
    if p.shortfalls().is_empty() {
        improve(&mut p, &order);
        return Ok(p);
    }
    // repair: refill short slots with the lowest scorers, evicting from
    // slots that have room above their minimum
    for m in &budget.meals {
        let s = m.slot;
        for &i in order.iter().rev() {
            if p.load[s.index()] >= m.min_kcal - EPS {
                break;
            }
            if !foods[i].0.allows(s) {
                continue;
            }
            match p.slot_of[i] {
                None if p.fits(i, s) => p.place(i, s),
                Some(from) if from != s => {
                    let kcal = foods[i].0.calories;
                    let src = budget.meal(from);
                    if p.load[from.index()] - kcal >= src.min_kcal - EPS
                        && p.load[s.index()] + kcal <= m.max_kcal + EPS
                    {
                        p.load[from.index()] -= kcal;
                        p.slot_of[i] = None;
                        p.place(i, s);
                    }
                }
                _ => {}
            }
        }
    }
    let short = p.shortfalls();
    if short.is_empty() {
        improve(&mut p, &order);
        Ok(p)
    } else {
        Err(short)
    }
}

/// Local search on a feasible packing: brings in each unused food (best
/// first) directly, after moving one placed food to another slot, or in
/// exchange for a lower-scored placed food. Every step keeps the plan feasible
/// and strictly raises the objective.
fn improve(p: &mut Packing<'_>, order: &[usize]) {
    let foods = p.foods;
    let score = |i: usize| foods[i].1;
    loop {
        let mut changed = false;
        for &u in order {
            if p.slot_of[u].is_some() {
                continue;
            }
            if let Some(s) = MealSlot::ALL.into_iter().find(|&s| p.fits(u, s)) {
                p.place(u, s);
                changed = true;
                continue;
            }
            'moves: for &v in order {
                let Some(from) = p.slot_of[v] else { continue };
                for to in MealSlot::ALL {
                    if to == from || !foods[v].0.allows(to) {
                        continue;
                    }
                    p.remove(v);
                    if p.fits(v, to) {
                        p.place(v, to);
                        if p.fits(u, from) {
                            p.place(u, from);
                            if p.feasible() {
                                changed = true;
                                break 'moves;
                            }
                            p.remove(u);
                        }
                        p.remove(v);
                    }
                    p.place(v, from);
                }
            }
            if p.slot_of[u].is_some() {
                continue;
            }
            // exchange with the lowest-scored placed food that makes room
            'swaps: for &v in order.iter().rev() {
                if score(v) >= score(u) {
                    break;
                }
                let Some(from) = p.slot_of[v] else { continue };
                p.remove(v);
                for s in MealSlot::ALL {
                    if p.fits(u, s) {
                        p.place(u, s);
                        if p.feasible() {
                            changed = true;
                            break 'swaps;
                        }
                        p.remove(u);
                    }
                }
                p.place(v, from);
            }
        }
        if !changed {
            break;
        }
    }
}

/// Candidate sets up to this size are searched to proven optimality.
pub const EXACT_PLAN_LIMIT: usize = 12;

/// Node budget of the search over larger candidate sets.
pub const SEARCH_NODE_LIMIT: usize = 2_000_000;

/// Depth-first branch and bound over "slot or unused" for each food, best
/// scores first, bounded by a fractional knapsack on the remaining calories.
struct Search<'a> {
    p: Packing<'a>,
    order: Vec<usize>,
    /// Candidates by descending score per kcal.
    density: Vec<usize>,
    depth_of: Vec<usize>,
    suffix_kcal: Vec<f64>,
    best: Option<(f64, Vec<Option<MealSlot>>)>,
    nodes: usize,
    limit: Option<usize>,
}

impl Search<'_> {
    fn bound(&self, k: usize) -> f64 {
        let b = self.p.budget;
        let room: f64 = b
            .meals
            .iter()
            .map(|m| (m.max_kcal - self.p.load[m.slot.index()]).max(0.0))
            .sum();
        let mut cap = room.min(b.total_max_kcal - self.p.day());
        let mut gain = 0.0;
        for &i in &self.density {
            if cap <= EPS {
                break;
            }
            if self.depth_of[i] < k {
                continue;
            }
            let (f, s) = &self.p.foods[i];
            if *s <= 0.0 {
                continue;
            }
            let take = (cap / f.calories).min(1.0);
            gain += take * s;
            cap -= take * f.calories;
        }
        gain
    }

    fn search(&mut self, k: usize, objective: f64) {
        self.nodes += 1;
        if self.limit.is_some_and(|l| self.nodes > l) {
            return;
        }
        if let Some((b, _)) = &self.best {
            if objective + self.bound(k) <= *b + EPS {
                return;
            }
        }
        if self.p.day() + self.suffix_kcal[k] < self.p.budget.total_min_kcal - EPS {
            return;
        }
        if k == self.order.len() {
            if self.p.feasible() {
                self.best = Some((objective, self.p.slot_of.clone()));
            }
            return;
        }
        let i = self.order[k];
        let score = self.p.foods[i].1;
        for s in MealSlot::ALL {
            if self.p.fits(i, s) {
                self.p.place(i, s);
                self.search(k + 1, objective + score);
                self.p.remove(i);
            }
        }
        self.search(k + 1, objective);
    }
}

fn search<'a>(
    foods: &'a [(FoodItem, f64)],
    budget: &'a DayBudget,
    incumbent: Option<&Packing<'_>>,
    limit: Option<usize>,
) -> Option<Packing<'a>> {
    let order = ranked(foods);
    let mut depth_of = vec![0; foods.len()];
    for (k, &i) in order.iter().enumerate() {
        depth_of[i] = k;
    }
    let mut density: Vec<usize> = (0..foods.len()).collect();
    density.sort_by(|&a, &b| {
        let da = foods[a].1 / foods[a].0.calories;
        let db = foods[b].1 / foods[b].0.calories;
        db.partial_cmp(&da)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut suffix_kcal = vec![0.0; foods.len() + 1];
    for k in (0..foods.len()).rev() {
        suffix_kcal[k] = suffix_kcal[k + 1] + foods[order[k]].0.calories;
    }
    let best = incumbent.map(|p| {
        let obj = (0..foods.len())
            .filter(|&i| p.slot_of[i].is_some())
            .map(|i| foods[i].1)
            .sum();
        (obj, p.slot_of.clone())
    });
    let mut s = Search {
        p: Packing::new(foods, budget),
        order,
        density,
        depth_of,
        suffix_kcal,
        best,
        nodes: 0,
        limit,
    };
    s.search(0, 0.0);
    if s.limit.is_some_and(|l| s.nodes > l) {
        log::debug!("menu search stopped at the node budget");
    }
    let (_, slot_of) = s.best?;
    let mut p = Packing::new(foods, budget);
    for (i, slot) in slot_of.into_iter().enumerate() {
        if let Some(slot) = slot {
            p.place(i, slot);
        }
    }
    Some(p)
}

/// Highest-objective feasible plan, by exhaustive branch and bound.
pub fn plan_menu_exact(foods: &[(FoodItem, f64)], budget: &DayBudget) -> Result<MealPlan> {
    budget.validate()?;
    search(foods, budget, None, None)
        .map(Packing::into_plan)
        .ok_or_else(|| {
            PlanError::InfeasiblePlan(vec![
                "no selection of the candidate foods meets every budget".into(),
            ])
        })
}

/// Fills the four meal slots with the best-scored foods within the budgets.
///
/// Foods are taken in descending score (ties by id): first to bring each slot
/// up to its minimum, then into the eligible slot with the most room left.
/// Slots still short are repaired with the lowest-scored foods, and a local
/// search then trades in better unused foods. The result seeds a branch and
/// bound that is exhaustive for up to [`EXACT_PLAN_LIMIT`] candidates and
/// capped at [`SEARCH_NODE_LIMIT`] nodes beyond, so the plan returned is never
/// worse than the greedy one.
pub fn plan_menu(foods: &[(FoodItem, f64)], budget: &DayBudget) -> Result<MealPlan> {
    budget.validate()?;
    if foods.is_empty() {
        return Err(PlanError::InfeasiblePlan(vec!["no candidate foods".into()]));
    }
    let limit = (foods.len() > EXACT_PLAN_LIMIT).then_some(SEARCH_NODE_LIMIT);
    match greedy(foods, budget) {
        Ok(p) => Ok(search(foods, budget, Some(&p), limit)
            .unwrap_or(p)
            .into_plan()),
        Err(short) => {
            log::info!("greedy menu infeasible ({}); searching", short.join("; "));
            search(foods, budget, None, limit)
                .map(Packing::into_plan)
                .ok_or(PlanError::InfeasiblePlan(short))
        }
    }
}

fn fmt_kcal(v: f64) -> String {
    let r = (v * 10.0).round() / 10.0;
    format!("{r}")
}

fn title(slot: MealSlot) -> &'static str {
    match slot {
        MealSlot::Breakfast => "Breakfast",
        MealSlot::Lunch => "Lunch",
        MealSlot::Dinner => "Dinner",
        MealSlot::Snacks => "Snacks",
    }
}

/// Two-column table: meal time and the foods with their calories.
pub fn render_plan(plan: &MealPlan) -> String {
    let rows: Vec<(&str, String)> = plan
        .slots
        .iter()
        .map(|s| {
            let foods: Vec<String> = s
                .items
                .iter()
                .map(|f| format!("{} ({} Cal)", f.food.name, fmt_kcal(f.kcal)))
                .collect();
            (
                title(s.slot),
                if foods.is_empty() {
                    "-".to_string()
                } else {
                    foods.join(", ")
                },
            )
        })
        .collect();
    let width = rows
        .iter()
        .map(|(_, f)| f.len())
        .max()
        .unwrap_or(0)
        .max("Food Name".len());
    let mut out = format!("| {:<9} | {:<width$} |\n", "Time", "Food Name");
    out += &format!("|{}|{}|\n", "-".repeat(11), "-".repeat(width + 2));
    for (t, f) in rows {
        out += &format!("| {t:<9} | {f:<width$} |\n");
    }
    out += &format!("Total: {} Cal\n", fmt_kcal(plan.day_total()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use MealSlot::*;

    fn food(id: &str, kcal: f64, slots: &[MealSlot]) -> FoodItem {
        FoodItem::new(id, id, kcal, slots)
    }

    fn planned(id: &str, kcal: f64, slot: MealSlot) -> PlannedFood {
        PlannedFood {
            food: food(id, kcal, &[slot]),
            kcal,
            score: 0.0,
        }
    }

    #[test]
    fn small_packings() {
        assert_eq!(
            pack_min_bins(&PackingInstance::unit(vec![0.5; 4]))
                .unwrap()
                .bin_count(),
            2
        );
        assert_eq!(
            pack_min_bins(&PackingInstance::unit(vec![0.4; 3]))
                .unwrap()
                .bin_count(),
            2
        );
        let empty = pack_min_bins(&PackingInstance::unit(vec![])).unwrap();
        assert_eq!(empty.bin_count(), 0);
        assert!(matches!(
            pack_min_bins(&PackingInstance::unit(vec![0.3, 1.2])),
            Err(PlanError::ItemExceedsCapacity { index: 1, .. })
        ));
    }

    #[test]
    fn exact_beats_ffd_where_ffd_is_suboptimal() {
        // FFD leaves one 0.2 over; 0.5+0.3+0.2, 0.4+0.4+0.2, 0.3+0.3+0.2+0.2 is tight
        let w = vec![0.5, 0.4, 0.4, 0.3, 0.3, 0.3, 0.2, 0.2, 0.2, 0.2];
        let inst = PackingInstance::unit(w.clone());
        assert_eq!(first_fit_decreasing(&inst).unwrap().bin_count(), 4);
        let ex = exact_min_bins(&inst).unwrap();
        assert_eq!(ex.bin_count(), 3);
        assert!(ex.loads.iter().all(|l| *l <= 1.0 + 1e-9));
        let mut seen: Vec<usize> = ex.bins.concat();
        seen.sort_unstable();
        assert_eq!(seen, (0..w.len()).collect::<Vec<_>>());
    }

    #[test]
    fn budget_validation() {
        assert!(DayBudget::default().validate().is_ok());
        let mut b = DayBudget::default();
        b.meals[1].min_kcal = 800.0;
        assert!(b.validate().is_err());
        let mut b = DayBudget::default();
        b.total_max_kcal = 1000.0;
        assert!(b.validate().is_err());
    }

    #[test]
    fn violations_are_reported() {
        let plan = MealPlan::from_slots(vec![
            (Breakfast, vec![planned("a", 350.0, Breakfast)]),
            (Lunch, vec![planned("b", 801.0, Lunch)]),
            (Dinner, vec![planned("c", 600.0, Dinner)]),
        ]);
        let v = validate_plan(&plan, &DayBudget::default());
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().starts_with("lunch > 700"));

        let mut dup = plan.clone();
        dup.slots[1].items = vec![planned("a", 600.0, Lunch)];
        let v = validate_plan(&dup, &DayBudget::default());
        assert!(v.contains(&Violation::DuplicateFood {
            food_id: "a".into()
        }));
        // "a" from the lunch copy allows lunch only, the breakfast copy breakfast only
        assert_eq!(v.len(), 1);

        let mut wrong = plan;
        wrong.slots[1].items = vec![planned("d", 600.0, Dinner)];
        let v = validate_plan(&wrong, &DayBudget::default());
        assert_eq!(
            v,
            vec![Violation::SlotNotAllowed {
                food_id: "d".into(),
                slot: Lunch
            }]
        );
    }

    #[test]
    fn empty_food_list_is_infeasible() {
        assert!(matches!(
            plan_menu(&[], &DayBudget::default()),
            Err(PlanError::InfeasiblePlan(_))
        ));
    }

    #[test]
    fn shortfall_diagnosis_names_the_slot() {
        let foods = vec![
            (food("a", 350.0, &[Breakfast]), 0.9),
            (food("b", 600.0, &[Lunch]), 0.8),
        ];
        match plan_menu(&foods, &DayBudget::default()) {
            Err(PlanError::InfeasiblePlan(why)) => {
                assert!(why.iter().any(|w| w.contains("dinner")))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn plan_is_valid_and_deterministic() {
        let foods = vec![
            (food("toast", 180.0, &[Breakfast, Snacks]), 0.4),
            (food("eggs", 160.0, &[Breakfast]), 0.6),
            (food("rice", 450.0, &[Lunch, Dinner]), 0.7),
            (food("dal", 150.0, &[Lunch, Dinner]), 0.3),
            (food("kebab", 690.0, &[Lunch, Dinner]), 0.9),
            (food("fruit", 90.0, &[Breakfast, Snacks]), 0.5),
        ];
        let b = DayBudget::default();
        let p = plan_menu(&foods, &b).unwrap();
        assert_eq!(validate_plan(&p, &b), vec![]);
        assert_eq!(p, plan_menu(&foods, &b).unwrap());
        let table = render_plan(&p);
        assert!(table.contains("Breakfast") && table.contains("Total:"));
    }
}
