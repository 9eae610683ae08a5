//! JSON formats for spaces, curve families, certificates and
//! representations.
//!
//! Reals are written in the shortest form that parses back to the same
//! `f64`, so every document round-trips exactly.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alberti::{AlbertiRepresentation, DirectionSpec, WeightedFragment};
use crate::curves::{CurveFamily, Fragment};
use crate::error::{invalid, Result};
use crate::metric::{Edge, MetricGraph};
use crate::modulus::ModulusCertificate;
use crate::spaces::Generator;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexJson {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xy: Option<Vec<f64>>,
}

/// `{"vertices": [{"id", "xy"}], "edges": [{"u", "v", "len", "mu"}], "metadata"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceJson {
    pub vertices: Vec<VertexJson>,
    pub edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Generator>,
}

impl SpaceJson {
    pub fn from_graph(graph: &MetricGraph) -> Self {
        SpaceJson {
            vertices: graph
                .all_coords()
                .iter()
                .enumerate()
                .map(|(id, xy)| VertexJson { id, xy: xy.clone() })
                .collect(),
            edges: graph.edges().to_vec(),
            metadata: graph.generator().cloned(),
        }
    }

    /// Vertex ids must be exactly `0..n`, in any order.
    pub fn to_graph(&self) -> Result<MetricGraph> {
        let n = self.vertices.len();
        let mut coords: Vec<Option<Option<Vec<f64>>>> = vec![None; n];
        for v in &self.vertices {
            if v.id >= n || coords[v.id].is_some() {
                return invalid(format!("vertex ids must be 0..{n} without repeats"));
            }
            coords[v.id] = Some(v.xy.clone());
        }
        let coords = coords.into_iter().map(|c| c.flatten()).collect();
        let graph = MetricGraph::new(coords, self.edges.clone())?;
        Ok(match &self.metadata {
            Some(g) => graph.with_generator(g.clone()),
            None => graph,
        })
    }
}

pub fn space_to_json(graph: &MetricGraph) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SpaceJson::from_graph(graph))?)
}

pub fn space_from_json(text: &str) -> Result<MetricGraph> {
    serde_json::from_str::<SpaceJson>(text)?.to_graph()
}

/// SHA-256 of the compact JSON of the vertices and edges; metadata does
/// not enter.
pub fn space_hash(graph: &MetricGraph) -> String {
    let mut doc = SpaceJson::from_graph(graph);
    doc.metadata = None;
    let bytes = serde_json::to_vec(&doc).expect("space documents always serialize");
    hex::encode(Sha256::digest(bytes))
}

/// `{"space": hash, "curves": [[id, ...], ...], "tag"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyJson {
    pub space: String,
    pub curves: Vec<Vec<usize>>,
    pub tag: String,
}

pub fn family_to_json(graph: &MetricGraph, family: &CurveFamily) -> Result<String> {
    let doc = FamilyJson {
        space: space_hash(graph),
        curves: family.curves.iter().map(|c| c.vertices().to_vec()).collect(),
        tag: family.tag.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Rebuilds the family, refusing documents written for another space.
pub fn family_from_json(graph: &MetricGraph, text: &str) -> Result<CurveFamily> {
    let doc: FamilyJson = serde_json::from_str(text)?;
    let hash = space_hash(graph);
    if doc.space != hash {
        return invalid(format!("family was built for space {} but the space is {hash}", doc.space));
    }
    CurveFamily::from_vertex_lists(graph, doc.curves, doc.tag)
}

pub fn certificate_from_json(text: &str) -> Result<ModulusCertificate> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FragmentEntry<P> {
    pub fragment: Fragment<P>,
    pub w: f64,
    pub density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<usize>>,
}

/// `{"P": [{"fragment", "w"}], "nu": "arclength", "direction"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationJson<P> {
    #[serde(rename = "P")]
    pub p: Vec<FragmentEntry<P>>,
    pub nu: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<DirectionSpec>,
}

impl<P: Clone> RepresentationJson<P> {
    pub fn from_representation(rep: &AlbertiRepresentation<P>) -> Self {
        RepresentationJson {
            p: rep
                .fragments
                .iter()
                .map(|wf| FragmentEntry {
                    fragment: wf.fragment.clone(),
                    w: wf.weight,
                    density: wf.density,
                    edges: wf.edges.clone(),
                })
                .collect(),
            nu: "arclength".into(),
            direction: rep.direction.clone(),
        }
    }

    pub fn to_representation(&self) -> Result<AlbertiRepresentation<P>> {
        if self.nu != "arclength" {
            return invalid(format!("unsupported fragment measure {:?}", self.nu));
        }
        Ok(AlbertiRepresentation {
            fragments: self
                .p
                .iter()
                .map(|e| WeightedFragment {
                    fragment: e.fragment.clone(),
                    weight: e.w,
                    density: e.density,
                    edges: e.edges.clone(),
                })
                .collect(),
            direction: self.direction.clone(),
        })
    }
}

pub fn representation_to_json<P: Clone + Serialize>(rep: &AlbertiRepresentation<P>) -> Result<String> {
    Ok(serde_json::to_string_pretty(&RepresentationJson::from_representation(rep))?)
}

pub fn representation_from_json<P: Clone + DeserializeOwned>(text: &str) -> Result<AlbertiRepresentation<P>> {
    serde_json::from_str::<RepresentationJson<P>>(text)?.to_representation()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alberti::{fubini_representation, Orientation};
    use crate::curves::{boundary_sides, crossing_family, CrossingStrategy};
    use crate::modulus::{solve_modulus, FamilySpec, SolveOptions};
    use crate::spaces::{grid_square, slit_carpet_level};

    #[test]
    fn space_round_trip() {
        let (g, _) = slit_carpet_level(1, 1).unwrap();
        let text = space_to_json(&g).unwrap();
        let back = space_from_json(&text).unwrap();
        assert_eq!(back.edges(), g.edges());
        assert_eq!(back.all_coords(), g.all_coords());
        assert_eq!(back.generator(), g.generator());
        assert_eq!(space_hash(&back), space_hash(&g));
        assert_eq!(space_to_json(&back).unwrap(), text);
    }

    #[test]
    fn unusual_reals_survive() {
        let g = MetricGraph::new(
            vec![Some(vec![0.1, 1.0 / 3.0]), None],
            vec![Edge::new(0, 1, std::f64::consts::PI, 1e-300)],
        )
        .unwrap();
        let back = space_from_json(&space_to_json(&g).unwrap()).unwrap();
        assert_eq!(back.edges(), g.edges());
        assert_eq!(back.all_coords(), g.all_coords());
    }

    #[test]
    fn bad_vertex_ids_are_rejected() {
        let text = r#"{"vertices":[{"id":0},{"id":0}],"edges":[]}"#;
        assert!(space_from_json(text).is_err());
    }

    #[test]
    fn family_round_trip_and_hash_check() {
        let g = grid_square(3).unwrap();
        let (a, b) = boundary_sides(&g, 0).unwrap();
        let fam = crossing_family(&g, &a, &b, 50, CrossingStrategy::ShortestK).unwrap();
        let text = family_to_json(&g, &fam).unwrap();
        assert_eq!(family_from_json(&g, &text).unwrap(), fam);
        let other = grid_square(4).unwrap();
        assert!(family_from_json(&other, &text).is_err());
    }

    #[test]
    fn certificate_round_trip() {
        let g = grid_square(3).unwrap();
        let (a, b) = boundary_sides(&g, 1).unwrap();
        let cert = solve_modulus(&g, &FamilySpec::connecting(a, b), 2.0, &SolveOptions::default()).unwrap();
        let back = certificate_from_json(&cert.to_json().unwrap()).unwrap();
        assert_eq!(back, cert);
    }

    #[test]
    fn representation_round_trip() {
        let g = grid_square(3).unwrap();
        let rep = fubini_representation(&g, Orientation::Cols).unwrap();
        let text = representation_to_json(&rep).unwrap();
        assert!(text.contains("\"P\"") && text.contains("\"arclength\""));
        let back: AlbertiRepresentation<usize> = representation_from_json(&text).unwrap();
        assert_eq!(back, rep);
    }
}
