//! Platform description: hosts, links, explicit routes and the host
//! power model consumed by the mapper and the simulator.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A compute host. `speed` is in abstract work units per second; the
/// power model interpolates linearly between `p_idle` and `p_full`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Host {
    pub id: String,
    pub node: String,
    pub speed: f64,
    pub p_idle: f64,
    pub p_full: f64,
    #[serde(default)]
    pub frontend: bool,
}

/// A network link shared by all transfers routed through it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub id: String,
    /// Bytes per second.
    pub bandwidth: f64,
    /// Seconds, charged once per traversal before any byte moves.
    pub latency: f64,
}

/// Declared route for one ordered host pair. `symmetric` materializes
/// the reverse route with the link order reversed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteRecord {
    pub src: String,
    pub dst: String,
    pub links: Vec<String>,
    #[serde(default)]
    pub symmetric: bool,
}

/// Resolved route: ordered link indices into [`PlatformModel::links`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Route {
    pub links: Vec<usize>,
    /// Sum of the latencies of all links on the route.
    pub latency: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlatformRecord {
    hosts: Vec<Host>,
    #[serde(default)]
    links: Vec<Link>,
    #[serde(default)]
    routes: Vec<RouteRecord>,
}

/// Validated platform. Hosts and links keep file order (the CSV energy
/// columns and the round-robin strategy depend on it).
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformModel {
    pub hosts: Vec<Host>,
    pub links: Vec<Link>,
    pub route_records: Vec<RouteRecord>,
    routes: BTreeMap<(usize, usize), Route>,
}

impl PlatformModel {
    pub fn host_index(&self, id: &str) -> Option<usize> {
        self.hosts.iter().position(|h| h.id == id)
    }

    pub fn host(&self, id: &str) -> Option<&Host> {
        self.hosts.iter().find(|h| h.id == id)
    }

    pub fn frontend(&self) -> &Host {
        self.hosts.iter().find(|h| h.frontend).expect("validated platform has a frontend")
    }

    /// Hosts eligible for built-in mapping strategies, in file order.
    pub fn mappable_hosts(&self, allow_frontend: bool) -> Vec<&Host> {
        self.hosts.iter().filter(|h| allow_frontend || !h.frontend).collect()
    }

    /// The declared route between two hosts; the empty route for src == dst.
    pub fn route_between(&self, src: &str, dst: &str) -> Result<&Route> {
        static EMPTY: Route = Route { links: Vec::new(), latency: 0.0 };
        let s = self
            .host_index(src)
            .ok_or_else(|| Error::NoRoute { src: src.into(), dst: dst.into() })?;
        let d = self
            .host_index(dst)
            .ok_or_else(|| Error::NoRoute { src: src.into(), dst: dst.into() })?;
        if s == d {
            return Ok(&EMPTY);
        }
        self.routes
            .get(&(s, d))
            .ok_or_else(|| Error::NoRoute { src: src.into(), dst: dst.into() })
    }

    pub(crate) fn route_by_index(&self, src: usize, dst: usize) -> Option<&Route> {
        static EMPTY: Route = Route { links: Vec::new(), latency: 0.0 };
        if src == dst {
            return Some(&EMPTY);
        }
        self.routes.get(&(src, dst))
    }
}

/// Idle-to-full linear power interpolation at the given CPU utilization.
pub fn power_at(host: &Host, utilization: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&utilization) {
        return Err(Error::Domain(format!(
            "utilization {utilization} outside [0, 1] on host `{}`",
            host.id
        )));
    }
    Ok(host.p_idle + (host.p_full - host.p_idle) * utilization)
}

/// Parse and validate a platform file.
pub fn parse_platform(path: impl AsRef<Path>) -> Result<PlatformModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_platform_str(&text)
}

/// Parse and validate a platform document from a string.
pub fn parse_platform_str(text: &str) -> Result<PlatformModel> {
    let rec: PlatformRecord = serde_json::from_str(text).map_err(|e| Error::schema(&e))?;
    build_platform(rec.hosts, rec.links, rec.routes)
}

/// Validate parts and assemble a platform (also the programmatic constructor).
pub fn build_platform(
    hosts: Vec<Host>,
    links: Vec<Link>,
    route_records: Vec<RouteRecord>,
) -> Result<PlatformModel> {
    let mut host_ids = BTreeSet::new();
    let mut frontends = 0usize;
    for h in &hosts {
        if !host_ids.insert(h.id.as_str()) {
            return Err(Error::validation(&h.id, "duplicate host id"));
        }
        if !(h.speed.is_finite() && h.speed > 0.0) {
            return Err(Error::validation(&h.id, "speed must be > 0"));
        }
        if !(h.p_idle.is_finite() && h.p_idle >= 0.0) {
            return Err(Error::validation(&h.id, "p_idle must be >= 0"));
        }
        if !(h.p_full.is_finite() && h.p_full >= h.p_idle) {
            return Err(Error::validation(&h.id, "p_full must be >= p_idle"));
        }
        if h.frontend {
            frontends += 1;
        }
    }
    if hosts.is_empty() {
        return Err(Error::validation("platform", "platform declares no hosts"));
    }
    if frontends != 1 {
        return Err(Error::validation(
            "platform",
            format!("exactly one frontend host required, found {frontends}"),
        ));
    }

    let mut link_index = BTreeMap::new();
    for (i, l) in links.iter().enumerate() {
        if link_index.insert(l.id.as_str(), i).is_some() {
            return Err(Error::validation(&l.id, "duplicate link id"));
        }
        if !(l.bandwidth.is_finite() && l.bandwidth > 0.0) {
            return Err(Error::validation(&l.id, "bandwidth must be > 0"));
        }
        if !(l.latency.is_finite() && l.latency >= 0.0) {
            return Err(Error::validation(&l.id, "latency must be >= 0"));
        }
    }

    let host_pos: BTreeMap<&str, usize> =
        hosts.iter().enumerate().map(|(i, h)| (h.id.as_str(), i)).collect();
    let mut routes: BTreeMap<(usize, usize), Route> = BTreeMap::new();
    for r in &route_records {
        let s = *host_pos
            .get(r.src.as_str())
            .ok_or_else(|| Error::validation(&r.src, "route references unknown host"))?;
        let d = *host_pos
            .get(r.dst.as_str())
            .ok_or_else(|| Error::validation(&r.dst, "route references unknown host"))?;
        if s == d {
            return Err(Error::validation(&r.src, "route from a host to itself is implicit"));
        }
        let mut link_ids = Vec::with_capacity(r.links.len());
        for lid in &r.links {
            let li = *link_index
                .get(lid.as_str())
                .ok_or_else(|| Error::validation(lid, "route references unknown link"))?;
            link_ids.push(li);
        }
        let latency = link_ids.iter().map(|&i| links[i].latency).sum();
        if routes
            .insert((s, d), Route { links: link_ids.clone(), latency })
            .is_some()
        {
            return Err(Error::validation(
                format!("{} -> {}", r.src, r.dst),
                "duplicate route declaration",
            ));
        }
        if r.symmetric {
            let mut rev = link_ids;
            rev.reverse();
            if routes.insert((d, s), Route { links: rev, latency }).is_some() {
                return Err(Error::validation(
                    format!("{} -> {}", r.dst, r.src),
                    "duplicate route declaration (symmetric)",
                ));
            }
        }
    }

    Ok(PlatformModel { hosts, links, route_records, routes })
}

/// Serialize a platform to its file form.
pub fn serialize_platform(platform: &PlatformModel) -> String {
    let rec = PlatformRecord {
        hosts: platform.hosts.clone(),
        links: platform.links.clone(),
        routes: platform.route_records.clone(),
    };
    let mut out = serde_json::to_string_pretty(&rec).expect("serialize");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn host(id: &str, speed: f64, frontend: bool) -> Host {
        Host {
            id: id.into(),
            node: "n0".into(),
            speed,
            p_idle: 95.0,
            p_full: 190.0,
            frontend,
        }
    }

    #[test]
    fn single_host_platform_is_valid() {
        let p = build_platform(vec![host("H", 1e9, true)], vec![], vec![]).unwrap();
        assert_eq!(p.hosts.len(), 1);
        assert!(p.route_between("H", "H").unwrap().links.is_empty());
    }

    #[test]
    fn p_full_below_p_idle_is_rejected() {
        let mut h = host("H", 1e9, true);
        h.p_full = 10.0;
        match build_platform(vec![h], vec![], vec![]) {
            Err(Error::Validation { entity, .. }) => assert_eq!(entity, "H"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn missing_frontend_is_rejected() {
        let p = build_platform(vec![host("H", 1e9, false)], vec![], vec![]);
        assert!(matches!(p, Err(Error::Validation { .. })));
    }

    #[test]
    fn symmetric_route_materializes_reverse() {
        let links = vec![
            Link { id: "a".into(), bandwidth: 1e9, latency: 1e-3 },
            Link { id: "b".into(), bandwidth: 1e9, latency: 2e-3 },
        ];
        let routes = vec![RouteRecord {
            src: "H1".into(),
            dst: "H2".into(),
            links: vec!["a".into(), "b".into()],
            symmetric: true,
        }];
        let p = build_platform(vec![host("H1", 1.0, true), host("H2", 1.0, false)], links, routes)
            .unwrap();
        let fwd = p.route_between("H1", "H2").unwrap();
        let rev = p.route_between("H2", "H1").unwrap();
        assert_eq!(fwd.links, vec![0, 1]);
        assert_eq!(rev.links, vec![1, 0]);
        assert!((fwd.latency - 3e-3).abs() < 1e-15);
        assert_eq!(fwd.latency, rev.latency);
    }

    #[test]
    fn unknown_destination_is_no_route() {
        let p = build_platform(vec![host("H", 1.0, true)], vec![], vec![]).unwrap();
        assert!(matches!(p.route_between("H", "X"), Err(Error::NoRoute { .. })));
    }

    #[test]
    fn power_interpolates_linearly() {
        let mut h = host("H", 1.0, true);
        h.p_idle = 100.0;
        h.p_full = 200.0;
        assert_eq!(power_at(&h, 0.0).unwrap(), 100.0);
        assert_eq!(power_at(&h, 0.5).unwrap(), 150.0);
        assert_eq!(power_at(&h, 1.0).unwrap(), 200.0);
        assert!(matches!(power_at(&h, 1.5), Err(Error::Domain(_))));
        assert!(matches!(power_at(&h, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn round_trip_preserves_structure() {
        let links = vec![Link { id: "a".into(), bandwidth: 5e8, latency: 1e-4 }];
        let routes = vec![RouteRecord {
            src: "H1".into(),
            dst: "H2".into(),
            links: vec!["a".into()],
            symmetric: true,
        }];
        let p = build_platform(vec![host("H1", 2.0, true), host("H2", 3.0, false)], links, routes)
            .unwrap();
        let text = serialize_platform(&p);
        let reparsed = parse_platform_str(&text).unwrap();
        assert_eq!(p, reparsed);
    }
}
