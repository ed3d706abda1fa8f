//! Opt-in wall-clock accounting per model component.
//!
//! Disabled by default; [`record`] enables it on the current thread and
//! returns the per-component totals collected while `f` ran.

use std::cell::RefCell;
use std::time::{Duration, Instant};

use indexmap::IndexMap;

thread_local! {
    static ACTIVE: RefCell<Option<IndexMap<&'static str, Duration>>> = const { RefCell::new(None) };
}

pub const ENCODER: &str = "encoder";
pub const INPUT: &str = "mask_input";
pub const ATTENTION: &str = "attention";
pub const ATTENTION_LOCAL: &str = "attention.local";
pub const ATTENTION_GLOBAL: &str = "attention.global";
pub const RECURRENT: &str = "recurrent";
pub const HEAD: &str = "mask_head";
pub const DECODER: &str = "decoder";

/// Components that partition one forward pass; nested entries are excluded.
pub const TOP_LEVEL: [&str; 6] = [ENCODER, INPUT, ATTENTION, RECURRENT, HEAD, DECODER];

/// Runs `f`, charging its duration to `name` when profiling is active.
pub fn scope<R>(name: &'static str, f: impl FnOnce() -> R) -> R {
    let on = ACTIVE.with(|a| a.borrow().is_some());
    if !on {
        return f();
    }
    let start = Instant::now();
    let out = f();
    let dt = start.elapsed();
    ACTIVE.with(|a| {
        if let Some(map) = a.borrow_mut().as_mut() {
            *map.entry(name).or_default() += dt;
        }
    });
    out
}

pub fn record<R>(f: impl FnOnce() -> R) -> (R, IndexMap<&'static str, Duration>) {
    let prev = ACTIVE.with(|a| a.borrow_mut().replace(IndexMap::new()));
    let out = f();
    let map = ACTIVE.with(|a| std::mem::replace(&mut *a.borrow_mut(), prev)).unwrap_or_default();
    (out, map)
}
