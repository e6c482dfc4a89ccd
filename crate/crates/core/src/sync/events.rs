use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgentId, EventKind, EventSeries, EventType, SyncParams};
use crate::scalar::{from_count, Scalar};

/// c^τ(x|y) over two sorted time lists: how often an event of `xs` follows
/// one of `ys` by less than `tau`, with coincident events counting one half.
///
/// Walks a sliding lower bound over `ys`; the window is twice `tau` wide so
/// that the exact `0 < tx - ty < tau` test below sees every candidate.
pub(crate) fn count_following<T: Scalar>(xs: &[T], ys: &[T], tau: T) -> T {
    let half = T::lit(0.5);
    let reach = tau + tau;
    let mut lo = 0;
    let mut total = T::zero();
    for &tx in xs {
        while lo < ys.len() && ys[lo] < tx - reach {
            lo += 1;
        }
        for &ty in &ys[lo..] {
            if ty > tx {
                break;
            }
            if tx == ty {
                total = total + half;
            } else {
                let d = tx - ty;
                if d > T::zero() && d < tau {
                    total = total + T::one();
                }
            }
        }
    }
    total
}

fn check_regular(e: EventType) -> Result<EventKind> {
    if e.is_early() {
        Err(Error::EarlyEventType(e))
    } else {
        Ok(e.kind())
    }
}

/// c^τ(x|y) for the kind of `e` (`Clap` and `Turn` count together).
pub fn directed_count<T: Scalar>(
    x: &EventSeries<T>,
    y: &EventSeries<T>,
    e: EventType,
    tau: T,
) -> Result<T> {
    let kind = check_regular(e)?;
    Ok(count_following(&x.times_of(kind), &y.times_of(kind), tau))
}

fn raw_sync<T: Scalar>(xs: &[T], ys: &[T], tau: T) -> T {
    let c = count_following(xs, ys, tau) + count_following(ys, xs, tau);
    c / (from_count::<T>(xs.len()) * from_count::<T>(ys.len())).sqrt()
}

/// Q_τ(e) as written: `(c(x|y) + c(y|x)) / sqrt(m_x · m_y)`.
///
/// Not clamped; series failing [`crate::model::validate_series`] can push it
/// above one. [`pair_sync_index`] clamps.
pub fn event_sync<T: Scalar>(
    x: &EventSeries<T>,
    y: &EventSeries<T>,
    e: EventType,
    tau: T,
) -> Result<T> {
    let kind = check_regular(e)?;
    let xs = x.times_of(kind);
    let ys = y.times_of(kind);
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptyEventType(kind));
    }
    Ok(raw_sync(&xs, &ys, tau))
}

/// Pairwise synchronization index Q_τ^{xy} of two agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PairIndex<T: Scalar> {
    pub a: AgentId,
    pub b: AgentId,
    pub q: T,
    /// Kinds whose Q_τ(e) exceeded one and was clamped.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clamped: Vec<EventKind>,
}

/// Event-count weighted average of Q_τ(e) over every kind present in at
/// least one series. A kind only one agent performs contributes zero with its
/// full weight `m_x(e) + m_y(e)`.
pub fn pair_sync_index<T: Scalar>(
    x: &EventSeries<T>,
    y: &EventSeries<T>,
    p: &SyncParams<T>,
) -> Result<PairIndex<T>> {
    let mut per_kind: BTreeMap<EventKind, (Vec<T>, Vec<T>)> = BTreeMap::new();
    for kind in x.kinds().union(&y.kinds()) {
        per_kind.insert(*kind, (x.times_of(*kind), y.times_of(*kind)));
    }
    if per_kind.is_empty() {
        return Err(Error::NoCommonBasis);
    }
    let mut num = T::zero();
    let mut den = T::zero();
    let mut clamped = Vec::new();
    for (kind, (xs, ys)) in &per_kind {
        let weight = from_count::<T>(xs.len() + ys.len());
        let q = if xs.is_empty() || ys.is_empty() {
            T::zero()
        } else {
            let raw = raw_sync(xs, ys, p.tau);
            if raw > T::one() {
                clamped.push(*kind);
                T::one()
            } else {
                raw
            }
        };
        num = num + q * weight;
        den = den + weight;
    }
    Ok(PairIndex {
        a: x.agent(),
        b: y.agent(),
        q: num / den,
        clamped,
    })
}
