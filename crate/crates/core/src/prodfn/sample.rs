use rand::Rng;

use crate::panel::Panel;
use crate::{Error, Result};

/// Estimation sample for one industry, ordered by firm then year.
#[derive(Debug, Clone, PartialEq)]
pub struct IndustrySample {
    pub industry: String,
    pub keys: Vec<(String, i32)>,
    pub year: Vec<i32>,
    pub y: Vec<f64>,
    pub l: Vec<f64>,
    pub k: Vec<f64>,
    pub m: Vec<f64>,
    /// `(current, previous)` index pairs of consecutive years of one firm.
    pub pairs: Vec<(usize, usize)>,
}

impl IndustrySample {
    /// Rows of `industry` with positive employment.
    pub fn from_panel(panel: &Panel, industry: &str) -> Result<Self> {
        let derived = panel.derived()?;
        let mut keys = Vec::new();
        let mut cols: [Vec<f64>; 4] = Default::default();
        let mut year = Vec::new();
        for (r, d) in panel.rows().iter().zip(derived) {
            if r.industry != industry {
                continue;
            }
            let Some(l) = d.log_employees else { continue };
            keys.push((r.firm_id.clone(), r.year));
            year.push(r.year);
            cols[0].push(d.log_sales);
            cols[1].push(l);
            cols[2].push(d.log_fixed_assets);
            cols[3].push(d.log_materials);
        }
        if keys.is_empty() {
            return Err(Error::Lookup(format!("no usable observations for industry {industry}")));
        }
        let [y, l, k, m] = cols;
        Ok(Self::from_arrays(industry, keys, y, l, k, m))
    }

    /// Builds a sample from parallel arrays sorted by `(firm, year)`.
    pub fn from_arrays(
        industry: &str,
        keys: Vec<(String, i32)>,
        y: Vec<f64>,
        l: Vec<f64>,
        k: Vec<f64>,
        m: Vec<f64>,
    ) -> Self {
        let year: Vec<i32> = keys.iter().map(|k| k.1).collect();
        let pairs = (1..keys.len())
            .filter(|&i| keys[i].0 == keys[i - 1].0 && keys[i].1 == keys[i - 1].1 + 1)
            .map(|i| (i, i - 1))
            .collect();
        Self {
            industry: industry.to_string(),
            keys,
            year,
            y,
            l,
            k,
            m,
            pairs,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Contiguous `[start, end)` row ranges, one per firm.
    fn firm_blocks(&self) -> Vec<(usize, usize)> {
        let mut blocks = Vec::new();
        let mut start = 0;
        for i in 1..=self.len() {
            if i == self.len() || self.keys[i].0 != self.keys[start].0 {
                blocks.push((start, i));
                start = i;
            }
        }
        blocks
    }

    /// Draws firms with replacement; repeated draws get distinct ids.
    pub fn resample_firms(&self, rng: &mut impl Rng) -> Self {
        let blocks = self.firm_blocks();
        let mut keys = Vec::new();
        let (mut y, mut l, mut k, mut m) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for draw in 0..blocks.len() {
            let (s, e) = blocks[rng.gen_range(0..blocks.len())];
            for i in s..e {
                keys.push((format!("{}#{draw}", self.keys[i].0), self.keys[i].1));
                y.push(self.y[i]);
                l.push(self.l[i]);
                k.push(self.k[i]);
                m.push(self.m[i]);
            }
        }
        Self::from_arrays(&self.industry, keys, y, l, k, m)
    }
}
