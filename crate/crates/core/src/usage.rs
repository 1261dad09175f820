//! Token budgeting and cost arithmetic for teacher requests.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Approximate token count: whitespace-separated words plus punctuation
/// characters, times 1.3, rounded up.
pub fn approx_tokens(text: &str) -> u64 {
    let mut units = 0u64;
    for word in text.split_whitespace() {
        let mut in_word = false;
        for c in word.chars() {
            if c.is_alphanumeric() {
                if !in_word {
                    units += 1;
                    in_word = true;
                }
            } else {
                units += 1;
                in_word = false;
            }
        }
    }
    // ceil(units * 1.3) in integer arithmetic
    (units * 13).div_ceil(10)
}

/// USD per 1000 tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pricing {
    pub input_per_1k: f64,
    pub output_per_1k: f64,
}

impl Default for Pricing {
    /// GPT-4 (8K context) list prices.
    fn default() -> Self {
        Self {
            input_per_1k: 0.03,
            output_per_1k: 0.06,
        }
    }
}

pub fn estimate_cost(input_tokens: i64, output_tokens: i64, pricing: &Pricing) -> Result<f64> {
    if input_tokens < 0 || output_tokens < 0 {
        return Err(Error::NegativeCount);
    }
    Ok(cost_of(input_tokens as u64, output_tokens as u64, pricing))
}

fn cost_of(input: u64, output: u64, p: &Pricing) -> f64 {
    (input as f64 * p.input_per_1k + output as f64 * p.output_per_1k) / 1000.0
}

/// Rounds a cost to the reporting precision of three decimals.
pub fn round_cost(usd: f64) -> f64 {
    libm::round(usd * 1000.0) / 1000.0
}

pub fn format_cost(usd: f64) -> alloc::string::String {
    alloc::format!("{:.3}", round_cost(usd))
}

/// Accumulated usage; additive over requests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub requests: u64,
    pub cost: f64,
}

impl UsageRecord {
    pub fn new(input_tokens: u64, output_tokens: u64, requests: u64, pricing: &Pricing) -> Self {
        Self {
            input_tokens,
            output_tokens,
            requests,
            cost: cost_of(input_tokens, output_tokens, pricing),
        }
    }

    pub fn add(&mut self, other: &UsageRecord) {
        self.input_tokens += other.input_tokens;
        self.output_tokens += other.output_tokens;
        self.requests += other.requests;
        self.cost += other.cost;
    }

    pub fn total_tokens(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}
