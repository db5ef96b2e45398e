//! Situated visualization geometry: colored trajectory path, camera frustums
//! and depth-anchored markers for the worst windows, exported as a JSON scene
//! document (schema in `docs/scene.schema.json`).
//!
//! Conventions: meters, right-handed, `+y` up, camera forward is the pose
//! orientation applied to `-z`. Element orientations are `[x, y, z, w]`
//! quaternions; a cylinder's axis is its local `+y`, a warning sign faces its
//! local `+z`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, LazyLock};

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::classify::ErrorClass;
use crate::error::{Error, Result};
use crate::trajectory::{orientation_facing, Pose, SubTrajectoryWindow, Trajectory};
use crate::uncertainty::UncertaintyEstimate;

pub const SCENE_SCHEMA: &str = "puk-scene/1";

pub const SPHERE_DIAMETER: f64 = 0.30;
pub const CYLINDER_DIAMETER: f64 = 0.10;
/// width, height, depth
pub const FRUSTUM_DIMENSIONS: [f64; 3] = [0.16, 0.12, 0.20];
pub const EXCLAMATION_DIMENSIONS: [f64; 3] = [0.05, 0.30, 0.05];
pub const WARNING_SIGN_DIMENSIONS: [f64; 3] = [0.30, 0.30, 0.0];

pub const FRUSTUM_SPACING: f64 = 0.5;
pub const MARKER_MIN_DISTANCE: f64 = 0.5;
pub const MAX_REGIONS: usize = 3;
pub const REGION_THRESHOLDS: [f64; 4] = [0.10, 0.05, 0.02, 0.01];
pub const HIGH_ERROR_WARNING: f64 = 0.20;

const ARC_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Cylinder,
    Sphere,
    Frustum,
    Exclamation,
    WarningSign,
}

/// Error class of the owning window, or neutral before estimates exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorClass {
    Neutral,
    Low,
    Medium,
    High,
}

impl ColorClass {
    pub fn rgb(self) -> &'static str {
        match self {
            ColorClass::High => "#ff0000",
            ColorClass::Medium => "#ffff00",
            ColorClass::Low | ColorClass::Neutral => "#0000ff",
        }
    }
}

impl From<ErrorClass> for ColorClass {
    fn from(c: ErrorClass) -> Self {
        match c {
            ErrorClass::Low => ColorClass::Low,
            ErrorClass::Medium => ColorClass::Medium,
            ErrorClass::High => ColorClass::High,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneElement {
    pub kind: ElementKind,
    pub position: [f64; 3],
    /// `[x, y, z, w]`
    pub orientation: [f64; 4],
    pub dimensions: [f64; 3],
    pub color_class: ColorClass,
    pub color: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub window_index: Option<usize>,
}

impl SceneElement {
    fn new(
        kind: ElementKind,
        position: Vector3<f64>,
        orientation: UnitQuaternion<f64>,
        dimensions: [f64; 3],
        color_class: ColorClass,
        window_index: Option<usize>,
    ) -> Self {
        let q = orientation.quaternion();
        SceneElement {
            kind,
            position: position.into(),
            orientation: [q.i, q.j, q.k, q.w],
            dimensions,
            color_class,
            color: color_class.rgb().to_string(),
            window_index,
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        let [x, y, z, w] = self.orientation;
        UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z))
    }
}

/// Depth seen from the camera at a window's mid frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDepth", into = "RawDepth")]
pub struct DepthSample {
    pub window_index: usize,
    depth: f64,
    normal: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDepth {
    window_index: usize,
    depth: f64,
    normal: [f64; 3],
}

impl TryFrom<RawDepth> for DepthSample {
    type Error = Error;

    fn try_from(r: RawDepth) -> Result<Self> {
        DepthSample::new(r.window_index, r.depth, Vector3::from(r.normal))
    }
}

impl From<DepthSample> for RawDepth {
    fn from(d: DepthSample) -> Self {
        RawDepth {
            window_index: d.window_index,
            depth: d.depth,
            normal: d.normal.into(),
        }
    }
}

impl DepthSample {
    /// `normal` is normalized; it must not be zero.
    pub fn new(window_index: usize, depth: f64, normal: Vector3<f64>) -> Result<Self> {
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(Error::validation(format!("depth must be positive, got {depth}")));
        }
        let len = normal.norm();
        if !(len > 1e-12 && len.is_finite()) {
            return Err(Error::validation("surface normal must be non-zero"));
        }
        Ok(DepthSample {
            window_index,
            depth,
            normal: normal / len,
        })
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.normal
    }
}

/// Infinite plane used to synthesize depth readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub point: [f64; 3],
    pub normal: [f64; 3],
}

fn mid_pose(traj: &Trajectory, w: &SubTrajectoryWindow) -> Option<Pose> {
    traj.samples().get(w.mid_frame / traj.frame_stride()).map(|s| s.pose)
}

/// Casts the mid-frame camera ray of every window against `planes` and keeps
/// the nearest hit, with the normal turned toward the camera.
pub fn synthetic_depths(traj: &Trajectory, window_frames: usize, planes: &[Plane]) -> Result<Vec<DepthSample>> {
    let mut out = Vec::new();
    for w in traj.windows(window_frames)? {
        let Some(cam) = mid_pose(traj, &w) else { continue };
        let fwd = cam.forward();
        let hit = planes
            .iter()
            .filter_map(|pl| {
                let n = Vector3::from(pl.normal);
                let denom = n.dot(&fwd);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = n.dot(&(Vector3::from(pl.point) - cam.position)) / denom;
                (t > 1e-9).then(|| (t, if denom > 0.0 { -n } else { n }))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((t, n)) = hit {
            out.push(DepthSample::new(w.index, t, n)?);
        }
    }
    Ok(out)
}

fn class_for(classes: &[ErrorClass], window: Option<usize>) -> ColorClass {
    match window.and_then(|k| classes.get(k)) {
        Some(&c) => c.into(),
        None => ColorClass::Neutral,
    }
}

/// Samples at the endpoints and midpoints of windows.
fn path_nodes(traj: &Trajectory, window_frames: usize) -> Vec<(usize, Vector3<f64>)> {
    let stride = traj.frame_stride();
    let half = window_frames / 2;
    let step = if half > 0 && half.is_multiple_of(stride) { half / stride } else { 1 };
    traj.samples()
        .iter()
        .enumerate()
        .step_by(step)
        .map(|(i, s)| (i * stride, s.pose.position))
        .collect()
}

/// Cylinders between consecutive path nodes and spheres at every node,
/// colored by the class of the window that contains them.
pub fn build_path(traj: &Trajectory, classes: &[ErrorClass], window_frames: usize) -> Vec<SceneElement> {
    let windows = traj.total_frames().checked_div(window_frames).unwrap_or(0);
    let window_of = |frame: usize, is_node: bool| -> Option<usize> {
        if classes.is_empty() || windows == 0 {
            return None;
        }
        let k = frame / window_frames;
        if k < windows {
            Some(k)
        } else if is_node && frame == windows * window_frames {
            Some(windows - 1)
        } else {
            None
        }
    };

    let nodes = path_nodes(traj, window_frames);
    let mut out = Vec::with_capacity(2 * nodes.len());
    for pair in nodes.windows(2) {
        let (fa, a) = pair[0];
        let (_, b) = pair[1];
        let axis = b - a;
        let length = axis.norm();
        if length < 1e-12 {
            continue;
        }
        let rot = UnitQuaternion::rotation_between(&Vector3::y(), &axis)
            .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI));
        let k = window_of(fa, false);
        out.push(SceneElement::new(
            ElementKind::Cylinder,
            (a + b) * 0.5,
            rot,
            [CYLINDER_DIAMETER, length, CYLINDER_DIAMETER],
            class_for(classes, k),
            k,
        ));
    }
    for &(f, p) in &nodes {
        let k = window_of(f, true);
        out.push(SceneElement::new(
            ElementKind::Sphere,
            p,
            UnitQuaternion::identity(),
            [SPHERE_DIAMETER; 3],
            class_for(classes, k),
            k,
        ));
    }
    out
}

/// One frustum per window in which the path length reaches a multiple of
/// 0.5 m, placed at that window's mid-frame pose.
pub fn place_frustums(traj: &Trajectory, classes: &[ErrorClass], window_frames: usize) -> Result<Vec<SceneElement>> {
    let arc = traj.cumulative_arc_lengths();
    let stride = traj.frame_stride();
    let mut out = Vec::new();
    for w in traj.windows(window_frames)? {
        let start = arc[w.start_frame / stride];
        let end = arc[w.end_frame / stride];
        // next multiple of the spacing strictly after `start`
        let next = ((start + ARC_EPS) / FRUSTUM_SPACING).floor() * FRUSTUM_SPACING + FRUSTUM_SPACING;
        if end + ARC_EPS < next {
            continue;
        }
        let Some(pose) = mid_pose(traj, &w) else { continue };
        out.push(SceneElement::new(
            ElementKind::Frustum,
            pose.position,
            pose.orientation,
            FRUSTUM_DIMENSIONS,
            class_for(classes, Some(w.index)),
            Some(w.index),
        ));
    }
    Ok(out)
}

/// Picks up to `max_regions` windows, relaxing the threshold 10, 5, 2, 1 cm
/// until enough windows qualify. Returned in descending estimate order.
pub fn select_regions(estimates: &[f64], max_regions: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..estimates.len()).collect();
    order.sort_by(|&a, &b| estimates[b].total_cmp(&estimates[a]).then(a.cmp(&b)));
    let mut qualifying = Vec::new();
    for thr in REGION_THRESHOLDS {
        qualifying = order.iter().copied().filter(|&k| estimates[k] >= thr).collect();
        if qualifying.len() >= max_regions {
            qualifying.truncate(max_regions);
            return qualifying;
        }
    }
    qualifying
}

/// Builds the marker element for an anchor point.
pub trait MarkerStyle: Send + Sync {
    fn name(&self) -> &str;

    /// `None` when the style renders no markers.
    fn marker(&self, anchor: Vector3<f64>, camera: &Pose, normal: &Vector3<f64>, color: ColorClass) -> Option<SceneElement>;
}

pub struct TrajectoryOnly;

impl MarkerStyle for TrajectoryOnly {
    fn name(&self) -> &str {
        "trajectory_only"
    }

    fn marker(&self, _: Vector3<f64>, _: &Pose, _: &Vector3<f64>, _: ColorClass) -> Option<SceneElement> {
        None
    }
}

/// Upright 3D exclamation point turned toward the camera.
pub struct ExclamationPoint;

impl MarkerStyle for ExclamationPoint {
    fn name(&self) -> &str {
        "exclamation"
    }

    fn marker(&self, anchor: Vector3<f64>, camera: &Pose, _: &Vector3<f64>, color: ColorClass) -> Option<SceneElement> {
        let mut to_cam = camera.position - anchor;
        to_cam.y = 0.0;
        let rot = if to_cam.norm() > 1e-9 {
            UnitQuaternion::face_towards(&to_cam, &Vector3::y())
        } else {
            UnitQuaternion::identity()
        };
        Some(SceneElement::new(ElementKind::Exclamation, anchor, rot, EXCLAMATION_DIMENSIONS, color, None))
    }
}

/// Flat sign whose face normal matches the surface.
pub struct WarningSign;

impl MarkerStyle for WarningSign {
    fn name(&self) -> &str {
        "warning_sign"
    }

    fn marker(&self, anchor: Vector3<f64>, _: &Pose, normal: &Vector3<f64>, color: ColorClass) -> Option<SceneElement> {
        // orientation_facing maps -z onto its argument, so +z lands on `normal`
        let rot = orientation_facing(&-normal, &Vector3::y());
        Some(SceneElement::new(ElementKind::WarningSign, anchor, rot, WARNING_SIGN_DIMENSIONS, color, None))
    }
}

#[derive(Clone, Default)]
pub struct MarkerRegistry {
    entries: BTreeMap<String, Arc<dyn MarkerStyle>>,
}

impl MarkerRegistry {
    pub fn builtin() -> Self {
        let mut reg = Self::default();
        reg.register(TrajectoryOnly);
        reg.register(ExclamationPoint);
        reg.register(WarningSign);
        reg
    }

    pub fn register(&mut self, style: impl MarkerStyle + 'static) {
        self.entries.insert(style.name().to_string(), Arc::new(style));
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn MarkerStyle>> {
        self.entries.get(name).cloned().ok_or_else(|| Error::UnknownName {
            kind: "visualization style",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl fmt::Debug for MarkerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

static MARKERS: LazyLock<MarkerRegistry> = LazyLock::new(MarkerRegistry::builtin);

pub fn builtin_markers() -> &'static MarkerRegistry {
    &MARKERS
}

/// Anchors a marker on the surface the camera looks at. Returns `None` when
/// an existing anchor lies within 0.5 m or the style draws no markers.
pub fn anchor_marker(
    camera: &Pose,
    depth: &DepthSample,
    style: &dyn MarkerStyle,
    existing: &[Vector3<f64>],
    color: ColorClass,
) -> Option<SceneElement> {
    let anchor = camera.position + camera.forward() * depth.depth;
    if existing.iter().any(|e| (e - anchor).norm() < MARKER_MIN_DISTANCE) {
        return None;
    }
    style.marker(anchor, camera, &depth.normal, color).map(|mut m| {
        m.window_index = Some(depth.window_index);
        m
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub schema: String,
    pub units: String,
    pub up_axis: String,
    pub camera_forward: String,
    pub style: String,
    pub trajectory_id: String,
    pub high_error_warning: bool,
    pub mean_estimate_m: f64,
    pub selected_windows: Vec<usize>,
    pub elements: Vec<SceneElement>,
}

impl SceneDocument {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn count(&self, kind: ElementKind) -> usize {
        self.elements.iter().filter(|e| e.kind == kind).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub window_frames: usize,
    pub max_regions: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            window_frames: crate::trajectory::DEFAULT_WINDOW_FRAMES,
            max_regions: MAX_REGIONS,
        }
    }
}

/// Path, frustums and markers for the selected problem regions.
pub fn build_scene(
    traj: &Trajectory,
    estimate: &UncertaintyEstimate,
    classes: &[ErrorClass],
    depths: &[DepthSample],
    style: &dyn MarkerStyle,
    cfg: &SceneConfig,
) -> Result<SceneDocument> {
    let values = &estimate.series.values;
    if classes.len() != values.len() {
        return Err(Error::LengthMismatch(format!(
            "{} classes vs {} estimates",
            classes.len(),
            values.len()
        )));
    }
    let windows = traj.windows(cfg.window_frames)?;
    if values.len() > windows.len() {
        return Err(Error::LengthMismatch(format!(
            "{} estimates for a trajectory with {} windows",
            values.len(),
            windows.len()
        )));
    }

    let mut elements = build_path(traj, classes, cfg.window_frames);
    elements.extend(place_frustums(traj, classes, cfg.window_frames)?);

    let selected = select_regions(values, cfg.max_regions);
    let mut anchors = Vec::new();
    for &k in &selected {
        let Some(depth) = depths.iter().find(|d| d.window_index == k) else { continue };
        let Some(camera) = mid_pose(traj, &windows[k]) else { continue };
        if let Some(m) = anchor_marker(&camera, depth, style, &anchors, classes[k].into()) {
            anchors.push(m.position());
            elements.push(m);
        }
    }

    let mean = if values.is_empty() { 0.0 } else { crate::stats::mean(values)? };
    Ok(SceneDocument {
        schema: SCENE_SCHEMA.to_string(),
        units: "meters".to_string(),
        up_axis: "+y".to_string(),
        camera_forward: "-z".to_string(),
        style: style.name().to_string(),
        trajectory_id: traj.id().to_string(),
        high_error_warning: mean > HIGH_ERROR_WARNING,
        mean_estimate_m: mean,
        selected_windows: selected,
        elements,
    })
}
