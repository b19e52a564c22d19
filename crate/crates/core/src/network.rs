//! Intersections: detection from shared OSM nodes, merging of near-duplicates,
//! classification and accident/traffic assignment.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rstar::primitives::GeomWithData;
use rstar::RTree;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{within_radius, GeoPoint};
use crate::ingest::{AccidentRecord, HighwayClass, OsmId, RoadSegment, TrafficCountPoint};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("no traffic data: the count point list is empty")]
    NoTrafficData,
    #[error("no modelable intersections")]
    NoModelableIntersections,
    #[error("intersection {node_id} has no {attribute}")]
    MissingAttribute { node_id: OsmId, attribute: &'static str },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadType {
    Primary,
    Secondary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionNode {
    /// Smallest OSM node id among the merged constituents.
    pub node_id: OsmId,
    pub location: GeoPoint,
    /// Way ids of incident road segments, ascending.
    pub incident_segments: Vec<OsmId>,
    /// Distinct highway classes among the incident segments.
    pub incident_classes: Vec<HighwayClass>,
    pub road_type: RoadType,
    pub traffic: Option<f64>,
    pub max_speed: Option<f64>,
    pub accident_count: u32,
    pub merged_from: Vec<OsmId>,
}

impl IntersectionNode {
    /// Whether a primary or secondary road meets here.
    pub fn has_major_arm(&self) -> bool {
        self.incident_classes
            .iter()
            .any(|c| matches!(c, HighwayClass::Primary | HighwayClass::Secondary))
    }
}

/// Primary if any incident segment is primary, secondary otherwise.
pub fn classify(node: &IntersectionNode) -> RoadType {
    if node.incident_classes.contains(&HighwayClass::Primary) {
        RoadType::Primary
    } else {
        RoadType::Secondary
    }
}

fn max_speed_over<'a>(segments: impl Iterator<Item = &'a RoadSegment>) -> Option<f64> {
    segments
        .filter_map(|s| s.max_speed.map(|m| m.value))
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
}

/// One node per OSM node shared by at least two ways with at least three
/// incident segment ends. Output is sorted by node id.
pub fn detect_intersections(segments: &[RoadSegment]) -> Vec<IntersectionNode> {
    #[derive(Default)]
    struct Tally {
        ways: BTreeSet<usize>,
        arms: usize,
        location: Option<GeoPoint>,
    }
    let mut tally: BTreeMap<OsmId, Tally> = BTreeMap::new();
    for (si, seg) in segments.iter().enumerate() {
        let n = seg.node_ids.len();
        for (i, (&id, &p)) in seg.node_ids.iter().zip(&seg.geometry).enumerate() {
            let t = tally.entry(id).or_default();
            t.ways.insert(si);
            t.arms += usize::from(i > 0) + usize::from(i + 1 < n);
            t.location.get_or_insert(p);
        }
    }

    tally
        .into_iter()
        .filter(|(_, t)| t.ways.len() >= 2 && t.arms >= 3)
        .map(|(id, t)| {
            let incident: Vec<&RoadSegment> = t.ways.iter().map(|&i| &segments[i]).collect();
            let mut incident_segments: Vec<OsmId> = incident.iter().map(|s| s.way_id).collect();
            incident_segments.sort_unstable();
            incident_segments.dedup();
            let classes: BTreeSet<HighwayClass> = incident.iter().map(|s| s.highway_class).collect();
            let mut node = IntersectionNode {
                node_id: id,
                location: t.location.expect("tallied nodes have a location"),
                incident_segments,
                incident_classes: classes.into_iter().collect(),
                road_type: RoadType::Secondary,
                traffic: None,
                max_speed: max_speed_over(incident.into_iter()),
                accident_count: 0,
                merged_from: vec![id],
            };
            node.road_type = classify(&node);
            node
        })
        .collect()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // keep the lower index as root so the result does not depend on visit order
        if ra < rb {
            self.0[rb] = ra;
        } else {
            self.0[ra] = rb;
        }
    }
}

type PointEntry = GeomWithData<[f64; 2], usize>;

fn point_tree(points: impl Iterator<Item = GeoPoint>) -> RTree<PointEntry> {
    RTree::bulk_load(
        points
            .enumerate()
            .map(|(i, p)| GeomWithData::new(p.as_array(), i))
            .collect(),
    )
}

/// Squared query radius slightly above `r²`; candidates are re-checked exactly.
fn padded_sq(r: f64) -> f64 {
    let padded = r * (1.0 + 1e-9);
    padded * padded
}

/// Single-linkage merge: nodes within `threshold` of each other (directly or
/// through a chain) collapse to one node at the cluster centroid.
pub fn merge_close(nodes: Vec<IntersectionNode>, threshold: f64) -> Result<Vec<IntersectionNode>, NetworkError> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(NetworkError::NonPositive {
            name: "merge threshold",
            value: threshold,
        });
    }
    let mut nodes = nodes;
    nodes.sort_by_key(|n| n.node_id);
    let tree = point_tree(nodes.iter().map(|n| n.location));
    let mut uf = UnionFind((0..nodes.len()).collect());
    for (i, n) in nodes.iter().enumerate() {
        for e in tree.locate_within_distance(n.location.as_array(), padded_sq(threshold)) {
            let j = e.data;
            if j != i && within_radius(n.location, nodes[j].location, threshold) {
                uf.union(i, j);
            }
        }
    }

    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..nodes.len() {
        let root = uf.find(i);
        clusters.entry(root).or_default().push(i);
    }

    let mut out: Vec<IntersectionNode> = clusters
        .into_values()
        .map(|members| {
            if members.len() == 1 {
                return nodes[members[0]].clone();
            }
            let k = members.len() as f64;
            let (sx, sy) = members.iter().fold((0.0, 0.0), |(x, y), &i| {
                (x + nodes[i].location.lon, y + nodes[i].location.lat)
            });
            let mut incident_segments = BTreeSet::new();
            let mut classes = BTreeSet::new();
            let mut merged_from = BTreeSet::new();
            let mut max_speed: Option<f64> = None;
            for &i in &members {
                let n = &nodes[i];
                incident_segments.extend(n.incident_segments.iter().copied());
                classes.extend(n.incident_classes.iter().copied());
                merged_from.extend(n.merged_from.iter().copied());
                if let Some(v) = n.max_speed {
                    max_speed = Some(max_speed.map_or(v, |m| m.max(v)));
                }
            }
            let mut node = IntersectionNode {
                node_id: *merged_from.first().expect("cluster is non-empty"),
                location: GeoPoint::new(sx / k, sy / k),
                incident_segments: incident_segments.into_iter().collect(),
                incident_classes: classes.into_iter().collect(),
                road_type: RoadType::Secondary,
                traffic: None,
                max_speed,
                accident_count: 0,
                merged_from: merged_from.into_iter().collect(),
            };
            node.road_type = classify(&node);
            node
        })
        .collect();
    out.sort_by_key(|n| n.node_id);
    Ok(out)
}

/// Most frequent parsed speed value over all segments (smallest on ties).
pub fn modal_speed(segments: &[RoadSegment]) -> Option<f64> {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for v in segments.iter().filter_map(|s| s.max_speed.map(|m| m.value)) {
        counts.entry(v.to_bits()).or_insert((v, 0)).1 += 1;
    }
    counts
        .into_values()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.total_cmp(&a.0)))
        .map(|(v, _)| v)
}

/// Gives nodes without a tagged speed on any arm the study-area modal speed.
pub fn fill_missing_speeds(nodes: &mut [IntersectionNode], segments: &[RoadSegment]) {
    if let Some(mode) = modal_speed(segments) {
        for n in nodes.iter_mut().filter(|n| n.max_speed.is_none()) {
            n.max_speed = Some(mode);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccidentAssignment {
    /// Receiving node per accident, in input order.
    pub assigned_to: Vec<Option<OsmId>>,
    pub counted: usize,
    pub uncounted: usize,
}

/// Counts each accident once, at the nearest node within `radius`
/// (smallest node id on ties). Existing counts are reset.
pub fn assign_accidents(
    nodes: &mut [IntersectionNode],
    accidents: &[AccidentRecord],
    radius: f64,
) -> Result<AccidentAssignment, NetworkError> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(NetworkError::NonPositive {
            name: "accident radius",
            value: radius,
        });
    }
    let tree = point_tree(nodes.iter().map(|n| n.location));
    let mut counts = vec![0u32; nodes.len()];
    let assigned_to: Vec<Option<OsmId>> = accidents
        .iter()
        .map(|a| {
            let best = tree
                .locate_within_distance(a.location.as_array(), padded_sq(radius))
                .map(|e| e.data)
                .filter(|&i| within_radius(nodes[i].location, a.location, radius))
                .min_by(|&i, &j| {
                    let di = nodes[i].location.distance(&a.location);
                    let dj = nodes[j].location.distance(&a.location);
                    di.total_cmp(&dj).then(nodes[i].node_id.cmp(&nodes[j].node_id))
                })?;
            counts[best] += 1;
            Some(nodes[best].node_id)
        })
        .collect();
    for (n, c) in nodes.iter_mut().zip(counts) {
        n.accident_count = c;
    }
    let counted = assigned_to.iter().filter(|a| a.is_some()).count();
    Ok(AccidentAssignment {
        uncounted: accidents.len() - counted,
        counted,
        assigned_to,
    })
}

/// Sets each node's traffic to the flow at its nearest count point
/// (smallest count point id on ties).
pub fn assign_traffic(nodes: &mut [IntersectionNode], count_points: &[TrafficCountPoint]) -> Result<(), NetworkError> {
    if count_points.is_empty() {
        return Err(NetworkError::NoTrafficData);
    }
    let tree = point_tree(count_points.iter().map(|c| c.location));
    for n in nodes.iter_mut() {
        let q = n.location.as_array();
        let mut best: Option<(f64, usize)> = None;
        for (e, d2) in tree.nearest_neighbor_iter_with_distance_2(q) {
            match best {
                Some((bd, _)) if d2 > bd => break,
                Some((bd, bi)) => {
                    let cand = &count_points[e.data];
                    let cur = &count_points[bi];
                    if d2 == bd && (cand.count_point_id, e.data) < (cur.count_point_id, bi) {
                        best = Some((d2, e.data));
                    }
                }
                None => best = Some((d2, e.data)),
            }
        }
        let (_, i) = best.expect("tree is non-empty");
        n.traffic = Some(count_points[i].aadf);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelingRow {
    pub node_id: OsmId,
    pub accident_count: u32,
    pub visible_percentage: Option<f64>,
    pub traffic: f64,
    pub max_speed: f64,
    pub road_type_primary: u8,
    pub road_type_secondary: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelingTable {
    pub rows: Vec<ModelingRow>,
    /// Intersections considered before the zero-accident and minor-road filters.
    pub candidate_nodes: usize,
}

/// Rows for intersections with at least one accident and a primary or
/// secondary arm, ordered by node id. `visibility` maps node id to its
/// visible percentage.
pub fn finalize_dataset(
    nodes: &[IntersectionNode],
    visibility: &BTreeMap<OsmId, f64>,
) -> Result<ModelingTable, NetworkError> {
    let mut rows = Vec::new();
    for n in nodes {
        if n.accident_count == 0 || !n.has_major_arm() {
            continue;
        }
        let missing = |attribute| NetworkError::MissingAttribute {
            node_id: n.node_id,
            attribute,
        };
        let road_type = classify(n);
        rows.push(ModelingRow {
            node_id: n.node_id,
            accident_count: n.accident_count,
            visible_percentage: visibility.get(&n.node_id).copied(),
            traffic: n.traffic.ok_or_else(|| missing("traffic"))?,
            max_speed: n.max_speed.ok_or_else(|| missing("max_speed"))?,
            road_type_primary: u8::from(road_type == RoadType::Primary),
            road_type_secondary: u8::from(road_type == RoadType::Secondary),
        });
    }
    if rows.is_empty() {
        return Err(NetworkError::NoModelableIntersections);
    }
    rows.sort_by_key(|r| r.node_id);
    Ok(ModelingTable {
        rows,
        candidate_nodes: nodes.len(),
    })
}

impl ModelingTable {
    pub const CSV_COLUMNS: [&'static str; 6] = [
        "accident_count",
        "visible_percentage",
        "traffic",
        "max_speed",
        "road_type_primary",
        "road_type_secondary",
    ];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), NetworkError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.accident_count.to_string(),
                r.visible_percentage.map(|v| v.to_string()).unwrap_or_default(),
                r.traffic.to_string(),
                r.max_speed.to_string(),
                r.road_type_primary.to_string(),
                r.road_type_secondary.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
