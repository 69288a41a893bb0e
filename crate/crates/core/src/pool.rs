//! Labeled/unlabeled pool bookkeeping and the simulated oracle.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::split::SplitPlan;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolState {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub spent_budget: usize,
}

impl PoolState {
    pub fn from_plan(plan: &SplitPlan, n_rows: usize) -> Self {
        Self {
            labeled: plan.initial_labeled_indices.clone(),
            unlabeled: plan.initial_unlabeled(n_rows),
            spent_budget: 0,
        }
    }

    /// Moves the instances at `positions` (into `unlabeled`) to the labeled
    /// list, in the given order, and returns their dataset indices.
    pub fn take_positions(&mut self, positions: &[usize]) -> Result<Vec<usize>> {
        let mut taken = vec![false; self.unlabeled.len()];
        for &p in positions {
            if p >= self.unlabeled.len() || taken[p] {
                return Err(Error::Protocol(format!("invalid or repeated pool position {p}")));
            }
            taken[p] = true;
        }
        let indices: Vec<usize> = positions.iter().map(|&p| self.unlabeled[p]).collect();
        let mut keep = Vec::with_capacity(self.unlabeled.len() - positions.len());
        for (p, &i) in self.unlabeled.iter().enumerate() {
            if !taken[p] {
                keep.push(i);
            }
        }
        self.unlabeled = keep;
        self.labeled.extend_from_slice(&indices);
        self.spent_budget += indices.len();
        Ok(indices)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consultation {
    pub iteration: usize,
    pub index: usize,
    pub label: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Test,
    Unlabeled,
    Labeled,
}

/// Holds the labels of the train split and answers each query once.
#[derive(Clone, Debug)]
pub struct Oracle {
    labels: Vec<usize>,
    status: Vec<Status>,
    log: Vec<Consultation>,
}

impl Oracle {
    pub fn new(labels: &[usize], plan: &SplitPlan) -> Self {
        let mut status = vec![Status::Test; labels.len()];
        for &i in &plan.train_indices {
            status[i] = Status::Unlabeled;
        }
        for &i in &plan.initial_labeled_indices {
            status[i] = Status::Labeled;
        }
        Self {
            labels: labels.to_vec(),
            status,
            log: Vec::new(),
        }
    }

    /// Label of an instance that was labeled from the start (not a consultation).
    pub fn initial_label(&self, index: usize) -> Result<usize> {
        match self.status.get(index) {
            Some(Status::Labeled) if !self.log.iter().any(|c| c.index == index) => Ok(self.labels[index]),
            _ => Err(Error::Protocol(format!("index {index} is not in the initial pool"))),
        }
    }

    /// Reveals the label of an unlabeled train instance and logs the consultation.
    pub fn label(&mut self, iteration: usize, index: usize) -> Result<usize> {
        match self.status.get(index) {
            Some(Status::Unlabeled) => {
                self.status[index] = Status::Labeled;
                let label = self.labels[index];
                self.log.push(Consultation {
                    iteration,
                    index,
                    label,
                });
                Ok(label)
            }
            Some(Status::Labeled) => Err(Error::Protocol(format!("index {index} is already labeled"))),
            Some(Status::Test) => Err(Error::Protocol(format!("index {index} belongs to the test split"))),
            None => Err(Error::Protocol(format!("index {index} out of range"))),
        }
    }

    pub fn consultations(&self) -> &[Consultation] {
        &self.log
    }
}
