use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};
use serde::{Deserialize, Serialize};

use super::{BuildingFootprint, HighwayClass, IngestError, OsmId, RoadSegment, SpeedLimit, SpeedUnit, StudyArea};
use crate::geometry::{GeoPoint, PolygonRing};

/// Highway values treated as part of the drivable network.
const DRIVABLE: &[&str] = &[
    "motorway",
    "trunk",
    "primary",
    "secondary",
    "tertiary",
    "unclassified",
    "residential",
    "living_street",
    "service",
    "road",
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OsmStats {
    pub nodes: usize,
    pub invalid_nodes: usize,
    pub ways: usize,
    pub ways_missing_nodes: usize,
    pub excluded_links_and_roundabouts: usize,
    pub unclosed_buildings: usize,
    pub invalid_buildings: usize,
    pub roads_outside_area: usize,
    pub buildings_outside_area: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsmExtract {
    pub roads: Vec<RoadSegment>,
    pub buildings: Vec<BuildingFootprint>,
    pub stats: OsmStats,
}

#[derive(Default)]
struct PendingWay {
    id: OsmId,
    refs: Vec<OsmId>,
    tags: BTreeMap<String, String>,
}

fn xml_err(reader_pos: u64, e: impl std::fmt::Display) -> IngestError {
    IngestError::Xml {
        offset: reader_pos,
        message: e.to_string(),
    }
}

fn attrs(e: &BytesStart<'_>, pos: u64) -> Result<Vec<(String, String)>, IngestError> {
    let mut out = Vec::new();
    for a in e.attributes() {
        let a = a.map_err(|err| xml_err(pos, err))?;
        let key = a.key.as_ref().to_owned();
        let value = a
            .normalized_value(XmlVersion::Implicit1_0)
            .map_err(|err| xml_err(pos, err))?
            .into_owned();
        out.push((key, value));
    }
    Ok(out)
}

fn attr<'a>(attrs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

/// Parses an OSM `maxspeed` value. Bare numbers are km/h per OSM convention.
pub fn parse_max_speed(raw: &str) -> Option<SpeedLimit> {
    let s = raw.trim().to_ascii_lowercase();
    let (num, unit) = if let Some(n) = s.strip_suffix("mph") {
        (n, SpeedUnit::Mph)
    } else if let Some(n) = s
        .strip_suffix("km/h")
        .or_else(|| s.strip_suffix("kmh"))
        .or_else(|| s.strip_suffix("kph"))
    {
        (n, SpeedUnit::Kmh)
    } else {
        (s.as_str(), SpeedUnit::Kmh)
    };
    let value: f64 = num.trim().parse().ok()?;
    (value > 0.0 && value.is_finite()).then_some(SpeedLimit { value, unit })
}

fn highway_class(tags: &BTreeMap<String, String>) -> Option<Result<HighwayClass, ()>> {
    let highway = tags.get("highway")?;
    if highway.ends_with("_link")
        || matches!(
            tags.get("junction").map(String::as_str),
            Some("roundabout" | "circular")
        )
    {
        return Some(Err(()));
    }
    if !DRIVABLE.contains(&highway.as_str()) {
        return None;
    }
    Some(Ok(match highway.as_str() {
        "primary" => HighwayClass::Primary,
        "secondary" => HighwayClass::Secondary,
        _ => HighwayClass::Other,
    }))
}

/// Reads roads and buildings from an OSM XML document, keeping those with a
/// vertex inside `area`.
pub fn parse_osm_extract<R: BufRead>(source: R, area: &StudyArea) -> Result<OsmExtract, IngestError> {
    let mut reader = Reader::from_reader(source);
    let mut buf = Vec::new();
    let mut nodes: HashMap<OsmId, GeoPoint> = HashMap::new();
    let mut ways: Vec<PendingWay> = Vec::new();
    let mut current: Option<PendingWay> = None;
    let mut stats = OsmStats::default();

    loop {
        let pos = reader.buffer_position();
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_err(reader.error_position(), e))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                match e.name().as_ref() {
                    "node" => {
                        let a = attrs(e, pos)?;
                        stats.nodes += 1;
                        let parsed = (|| {
                            let id: OsmId = attr(&a, "id")?.parse().ok()?;
                            let lat: f64 = attr(&a, "lat")?.parse().ok()?;
                            let lon: f64 = attr(&a, "lon")?.parse().ok()?;
                            Some((id, GeoPoint::try_new(lon, lat).ok()?))
                        })();
                        match parsed {
                            Some((id, p)) => {
                                nodes.insert(id, p);
                            }
                            None => stats.invalid_nodes += 1,
                        }
                    }
                    "way" => {
                        let a = attrs(e, pos)?;
                        stats.ways += 1;
                        let id = attr(&a, "id").and_then(|v| v.parse().ok());
                        if let (Some(id), false) = (id, is_empty) {
                            current = Some(PendingWay {
                                id,
                                ..Default::default()
                            });
                        }
                    }
                    "nd" => {
                        if let Some(w) = current.as_mut() {
                            let a = attrs(e, pos)?;
                            match attr(&a, "ref").and_then(|v| v.parse().ok()) {
                                Some(r) => w.refs.push(r),
                                // an unreadable ref behaves like a missing node
                                None => w.refs.push(OsmId::MIN),
                            }
                        }
                    }
                    "tag" => {
                        if let Some(w) = current.as_mut() {
                            let a = attrs(e, pos)?;
                            if let (Some(k), Some(v)) = (attr(&a, "k"), attr(&a, "v")) {
                                w.tags.insert(k.to_owned(), v.to_owned());
                            }
                        }
                    }
                    _ => {}
                }
            }
            Event::End(ref e) if e.name().as_ref() == "way" => {
                if let Some(w) = current.take() {
                    ways.push(w);
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if current.is_some() {
        return Err(xml_err(reader.buffer_position(), "unterminated <way> element"));
    }

    let mut roads = Vec::new();
    let mut buildings = Vec::new();
    for w in ways {
        let class = highway_class(&w.tags);
        let is_building = w.tags.get("building").is_some_and(|v| v != "no");
        if class.is_none() && !is_building {
            continue;
        }
        let Some(geometry) = w
            .refs
            .iter()
            .map(|r| nodes.get(r).copied())
            .collect::<Option<Vec<GeoPoint>>>()
        else {
            stats.ways_missing_nodes += 1;
            continue;
        };

        match class {
            Some(Ok(highway_class)) if geometry.len() >= 2 => {
                if geometry.iter().any(|&p| area.contains(p)) {
                    roads.push(RoadSegment {
                        way_id: w.id,
                        highway: w.tags["highway"].clone(),
                        highway_class,
                        max_speed: w.tags.get("maxspeed").and_then(|s| parse_max_speed(s)),
                        node_ids: w.refs.clone(),
                        geometry: geometry.clone(),
                    });
                } else {
                    stats.roads_outside_area += 1;
                }
            }
            Some(Err(())) => stats.excluded_links_and_roundabouts += 1,
            _ => {}
        }

        if is_building {
            let closed = w.refs.len() >= 4 && w.refs.first() == w.refs.last();
            if !closed {
                stats.unclosed_buildings += 1;
                continue;
            }
            match PolygonRing::new(geometry) {
                Ok(ring) => {
                    if ring.vertices().iter().any(|&p| area.contains(p)) {
                        buildings.push(BuildingFootprint {
                            way_id: w.id,
                            ring,
                            tags: w.tags,
                        });
                    } else {
                        stats.buildings_outside_area += 1;
                    }
                }
                Err(_) => stats.invalid_buildings += 1,
            }
        }
    }

    Ok(OsmExtract {
        roads,
        buildings,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area() -> StudyArea {
        StudyArea::new(GeoPoint::new(-0.19, 51.50), 3000.0).unwrap()
    }

    fn parse(xml: &str) -> OsmExtract {
        parse_osm_extract(xml.as_bytes(), &area()).unwrap()
    }

    const NODES: &str = r#"
        <node id="1" lat="51.5000" lon="-0.1900"/>
        <node id="2" lat="51.5000" lon="-0.1890"/>
        <node id="3" lat="51.5001" lon="-0.1890"/>
        <node id="4" lat="51.5001" lon="-0.1900"/>
        <node id="5" lat="51.50005" lon="-0.18995"/>
    "#;

    #[test]
    fn primary_road_with_mph_limit() {
        let xml = format!(
            r#"<osm>{NODES}<way id="10"><nd ref="1"/><nd ref="2"/>
               <tag k="highway" v="primary"/><tag k="maxspeed" v="30 mph"/></way></osm>"#
        );
        let out = parse(&xml);
        assert_eq!(out.roads.len(), 1);
        let r = &out.roads[0];
        assert_eq!(r.highway_class, HighwayClass::Primary);
        assert_eq!(
            r.max_speed,
            Some(SpeedLimit {
                value: 30.0,
                unit: SpeedUnit::Mph
            })
        );
        assert_eq!(r.node_ids, vec![1, 2]);
    }

    #[test]
    fn closed_building() {
        let xml = format!(
            r#"<osm>{NODES}<way id="20"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/><nd ref="1"/>
               <tag k="building" v="yes"/><tag k="height" v="12"/></way></osm>"#
        );
        let out = parse(&xml);
        assert_eq!(out.buildings.len(), 1);
        assert_eq!(out.buildings[0].ring.vertices().len(), 4);
        assert_eq!(out.buildings[0].tags["height"], "12");
    }

    #[test]
    fn unclosed_building_skipped_with_warning() {
        let xml = format!(
            r#"<osm>{NODES}
               <way id="20"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/><tag k="building" v="yes"/></way>
               <way id="21"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="1"/><tag k="building" v="house"/></way>
               </osm>"#
        );
        let out = parse(&xml);
        assert_eq!(out.buildings.len(), 1);
        assert_eq!(out.buildings[0].way_id, 21);
        assert_eq!(out.stats.unclosed_buildings, 1);
    }

    #[test]
    fn missing_node_skips_way() {
        let xml = format!(
            r#"<osm>{NODES}<way id="10"><nd ref="1"/><nd ref="99"/><tag k="highway" v="primary"/></way></osm>"#
        );
        let out = parse(&xml);
        assert!(out.roads.is_empty());
        assert_eq!(out.stats.ways_missing_nodes, 1);
    }

    #[test]
    fn classes_links_and_roundabouts() {
        let xml = format!(
            r#"<osm>{NODES}
              <way id="1"><nd ref="1"/><nd ref="2"/><tag k="highway" v="secondary"/></way>
              <way id="2"><nd ref="2"/><nd ref="3"/><tag k="highway" v="residential"/></way>
              <way id="3"><nd ref="3"/><nd ref="4"/><tag k="highway" v="primary_link"/></way>
              <way id="4"><nd ref="3"/><nd ref="4"/><tag k="highway" v="primary"/><tag k="junction" v="roundabout"/></way>
              <way id="5"><nd ref="3"/><nd ref="4"/><tag k="highway" v="footway"/></way>
            </osm>"#
        );
        let out = parse(&xml);
        let classes: Vec<_> = out.roads.iter().map(|r| (r.way_id, r.highway_class)).collect();
        assert_eq!(classes, vec![(1, HighwayClass::Secondary), (2, HighwayClass::Other)]);
        assert_eq!(out.stats.excluded_links_and_roundabouts, 2);
    }

    #[test]
    fn outside_area_dropped() {
        let xml = r#"<osm><node id="1" lat="52.5" lon="-0.19"/><node id="2" lat="52.5" lon="-0.18"/>
            <way id="1"><nd ref="1"/><nd ref="2"/><tag k="highway" v="primary"/></way></osm>"#;
        let out = parse(xml);
        assert!(out.roads.is_empty());
        assert_eq!(out.stats.roads_outside_area, 1);
    }

    #[test]
    fn malformed_xml_reports_offset() {
        let xml = r#"<osm><node id="1" lat="51.5" lon="-0.19"></way></osm>"#;
        match parse_osm_extract(xml.as_bytes(), &area()) {
            Err(IngestError::Xml { offset, .. }) => assert!(offset > 0),
            other => panic!("expected XML error, got {other:?}"),
        }
    }

    #[test]
    fn max_speed_forms() {
        assert_eq!(
            parse_max_speed("30 mph"),
            Some(SpeedLimit {
                value: 30.0,
                unit: SpeedUnit::Mph
            })
        );
        assert_eq!(
            parse_max_speed("20mph"),
            Some(SpeedLimit {
                value: 20.0,
                unit: SpeedUnit::Mph
            })
        );
        assert_eq!(
            parse_max_speed("50"),
            Some(SpeedLimit {
                value: 50.0,
                unit: SpeedUnit::Kmh
            })
        );
        assert_eq!(
            parse_max_speed("48 km/h"),
            Some(SpeedLimit {
                value: 48.0,
                unit: SpeedUnit::Kmh
            })
        );
        assert_eq!(parse_max_speed("none"), None);
        assert_eq!(parse_max_speed("-5"), None);
        assert_eq!(parse_max_speed("GB:nsl_single"), None);
    }
}
