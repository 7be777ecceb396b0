//! Runtime description of one experiment.

use crate::adversary::Strategy;
use crate::error::{Error, Result};
use crate::prob::{ConditionalPmf, JointPmf, SubsetView};
use crate::region::{HonestCollection, InfoModel};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub p: JointPmf,
    pub h: HonestCollection,
    pub info: InfoModel,
    pub h_true: SubsetView,
    /// Index into the channel list of `h_true`.
    pub r_true: usize,
    pub strategy: Strategy,
}

impl Scenario {
    pub fn new(
        p: JointPmf,
        h: HonestCollection,
        info: InfoModel,
        h_true: SubsetView,
        r_true: usize,
        strategy: Strategy,
    ) -> Result<Self> {
        let s = Scenario { p, h, info, h_true, r_true, strategy };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.m() != self.p.m() {
            return Err(Error::Scenario("collection arity differs from the source".into()));
        }
        let pos = self
            .h
            .position(&self.h_true)
            .ok_or_else(|| Error::Scenario(format!("true honest set {} is not a candidate", self.h_true)))?;
        if self.r_true >= self.info.channels(pos).len() {
            return Err(Error::Scenario("true channel index out of range".into()));
        }
        self.strategy.validate(self)
    }

    pub fn m(&self) -> usize {
        self.p.m()
    }

    pub fn traitors(&self) -> SubsetView {
        self.h_true.complement(self.m())
    }

    pub fn true_channel(&self) -> &ConditionalPmf {
        let pos = self.h.position(&self.h_true).expect("validated");
        &self.info.channels(pos)[self.r_true]
    }

    pub fn is_traitor(&self, i: usize) -> bool {
        !self.h_true.contains(i)
    }
}
