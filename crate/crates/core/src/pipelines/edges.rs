//! Edge detection by MLG window smoothing, next to a single-layer GSP
//! variant and the Sobel / Prewitt operators.

use serde::{Deserialize, Serialize};

use crate::convolution::{
    detect_edges, gradient_magnitude, make_localization_kernel, smooth_image, window_basis, BorderPolicy, EdgeMap,
    GradientOperator, KernelVariant, Planes, ThresholdPolicy, WindowSpec,
};
use crate::error::Result;
use crate::imageio::{GrayImage, RgbImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeMethod {
    #[serde(rename = "MLG-c1")]
    MlgC1,
    #[serde(rename = "MLG-c2")]
    MlgC2,
    #[serde(rename = "GSP")]
    Gsp,
    #[serde(rename = "Sobel")]
    Sobel,
    #[serde(rename = "Prewitt")]
    Prewitt,
}

impl EdgeMethod {
    /// Panel order.
    pub const ALL: [EdgeMethod; 5] = [
        EdgeMethod::MlgC1,
        EdgeMethod::MlgC2,
        EdgeMethod::Gsp,
        EdgeMethod::Sobel,
        EdgeMethod::Prewitt,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EdgeMethod::MlgC1 => "MLG-c1",
            EdgeMethod::MlgC2 => "MLG-c2",
            EdgeMethod::Gsp => "GSP",
            EdgeMethod::Sobel => "Sobel",
            EdgeMethod::Prewitt => "Prewitt",
        }
    }

    pub fn for_kernel(variant: KernelVariant) -> Self {
        match variant {
            KernelVariant::C1 => EdgeMethod::MlgC1,
            KernelVariant::C2 => EdgeMethod::MlgC2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeConfig {
    /// Window side `k` (odd).
    pub k: usize,
    pub threshold: ThresholdPolicy,
    pub normalize_dc: bool,
    pub border: BorderPolicy,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        EdgeConfig {
            k: 3,
            threshold: ThresholdPolicy::default(),
            normalize_dc: true,
            border: BorderPolicy::Replicate,
        }
    }
}

/// The five edge maps in [`EdgeMethod::ALL`] order.
#[derive(Clone, Debug)]
pub struct EdgePanel {
    pub maps: Vec<(EdgeMethod, EdgeMap)>,
}

impl EdgePanel {
    pub fn get(&self, method: EdgeMethod) -> &EdgeMap {
        &self.maps.iter().find(|(m, _)| *m == method).expect("all methods present").1
    }

    /// Maps side by side, separated by 2-pixel gray bars.
    pub fn image(&self) -> GrayImage {
        let (h, w) = (self.maps[0].1.height, self.maps[0].1.width);
        let gap = 2;
        let total_w = self.maps.len() * w + (self.maps.len() - 1) * gap;
        let mut values = vec![0.5; h * total_w];
        for (k, (_, map)) in self.maps.iter().enumerate() {
            let x0 = k * (w + gap);
            for r in 0..h {
                for c in 0..w {
                    values[r * total_w + x0 + c] = if map.edges[r * w + c] { 1.0 } else { 0.0 };
                }
            }
        }
        GrayImage::new(h, total_w, values).expect("panel dimensions")
    }
}

fn window_spec(config: &EdgeConfig, layers: usize) -> Result<WindowSpec> {
    let mut spec = WindowSpec::new(config.k, layers)?;
    spec.border = config.border;
    Ok(spec)
}

/// Equal-weight channel mean: the gray image that DC-normalized 3-layer
/// window smoothing leaves unchanged on flat regions.
pub fn channel_mean(img: &RgbImage) -> GrayImage {
    let values = img.pixels().iter().map(|p| (p[0] + p[1] + p[2]) / 3.0).collect();
    GrayImage::new(img.height(), img.width(), values).expect("dimensions preserved")
}

/// Runs all five detectors on `img` under one threshold policy. The MLG
/// differences are taken against [`channel_mean`], the single-layer ones
/// against luma.
pub fn edge_detect_pipeline(img: &RgbImage, config: &EdgeConfig) -> Result<EdgePanel> {
    let (h, w) = (img.height(), img.width());
    let gray = img.luma();
    let mean_gray = channel_mean(img);
    let mut maps = Vec::with_capacity(5);

    let spec = window_spec(config, 3)?;
    let basis = window_basis(&spec)?;
    let channels = [img.channel(0), img.channel(1), img.channel(2)];
    let planes = Planes {
        planes: &channels,
        height: h,
        width: w,
    };
    for variant in [KernelVariant::C1, KernelVariant::C2] {
        let kernel = make_localization_kernel(&spec, variant)?;
        let smoothed = smooth_image(planes, &spec, &kernel, &basis, config.normalize_dc)?;
        maps.push((EdgeMethod::for_kernel(variant), detect_edges(&mean_gray, &smoothed, config.threshold)?));
    }

    let spec1 = window_spec(config, 1)?;
    let basis1 = window_basis(&spec1)?;
    let kernel1 = make_localization_kernel(&spec1, KernelVariant::C1)?;
    let luma_plane = [gray.values().to_vec()];
    let planes1 = Planes {
        planes: &luma_plane,
        height: h,
        width: w,
    };
    let smoothed1 = smooth_image(planes1, &spec1, &kernel1, &basis1, config.normalize_dc)?;
    maps.push((EdgeMethod::Gsp, detect_edges(&gray, &smoothed1, config.threshold)?));

    for (method, op) in [(EdgeMethod::Sobel, GradientOperator::Sobel), (EdgeMethod::Prewitt, GradientOperator::Prewitt)] {
        let mag = gradient_magnitude(&gray, op);
        maps.push((method, EdgeMap::from_field(h, w, mag.values().to_vec(), config.threshold)?));
    }
    Ok(EdgePanel { maps })
}
