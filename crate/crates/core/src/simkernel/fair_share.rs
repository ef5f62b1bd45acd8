//! Max-min fair rate allocation by progressive filling.
//!
//! Every host is a resource of capacity `speed` shared by the compute
//! actions placed on it; every link is a resource of capacity
//! `bandwidth` shared by the transfers routed through it. All unfrozen
//! actions rise at the same fill level until some resource saturates;
//! that resource's users freeze at the current level, its consumption is
//! subtracted, and filling continues on the residual system.

/// Assign a rate to each user. `capacities[r]` is resource r's capacity;
/// `memberships[u]` lists the resources user u consumes. Users with an
/// empty membership list get `f64::INFINITY` (nothing constrains them).
pub fn fair_share(capacities: &[f64], memberships: &[Vec<usize>]) -> Vec<f64> {
    let n_users = memberships.len();
    let mut rates = vec![f64::INFINITY; n_users];
    if n_users == 0 {
        return rates;
    }

    let mut remaining = capacities.to_vec();
    let mut active_users: Vec<usize> = vec![0; capacities.len()];
    let mut frozen = vec![false; n_users];
    let mut n_active = 0usize;
    for (u, members) in memberships.iter().enumerate() {
        if members.is_empty() {
            frozen[u] = true;
            continue;
        }
        n_active += 1;
        for &r in members {
            active_users[r] += 1;
        }
    }

    let mut fill = 0.0f64;
    while n_active > 0 {
        // Bottleneck: the resource whose equal split of the remaining
        // capacity is smallest.
        let mut delta = f64::INFINITY;
        for (r, &cap) in remaining.iter().enumerate() {
            if active_users[r] > 0 {
                let share = cap / active_users[r] as f64;
                if share < delta {
                    delta = share;
                }
            }
        }
        debug_assert!(delta.is_finite(), "active user without a live resource");

        fill += delta;
        for (r, cap) in remaining.iter_mut().enumerate() {
            if active_users[r] > 0 {
                *cap -= delta * active_users[r] as f64;
            }
        }

        // Freeze every user touching a saturated resource. Saturation is
        // detected relative to the original capacity to keep the check
        // robust against accumulated subtraction error.
        for r in 0..remaining.len() {
            if active_users[r] == 0 {
                continue;
            }
            if remaining[r] <= capacities[r] * 1e-12 {
                for (u, members) in memberships.iter().enumerate() {
                    if !frozen[u] && members.contains(&r) {
                        frozen[u] = true;
                        rates[u] = fill;
                        n_active -= 1;
                        for &m in members {
                            active_users[m] -= 1;
                        }
                    }
                }
                remaining[r] = 0.0;
            }
        }
    }

    rates
}
