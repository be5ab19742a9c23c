use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mgsp_core::builders::GaussianOptions;
use mgsp_core::convolution::{BorderPolicy, KernelVariant, ThresholdPolicy};
use mgsp_core::cube::{read_label_csv, write_label_csv, ImageCube};
use mgsp_core::imageio::{save_binary_map, RgbImage};
use mgsp_core::mlg::{check_undirected, SYMMETRY_TOL};
use mgsp_core::pipelines::compression::Direction;
use mgsp_core::pipelines::{
    boundary_accuracy, compress_rgb, edge_detect_pipeline, gsp_baseline, kmeans_baseline, segment_hsi,
    CompressionConfig, CompressionMethod, EdgeConfig, EdgeMethod, SegmentationConfig, SegmentationResult,
};
use mgsp_core::sampling::CoefficientOrdering;
use mgsp_core::spectra::{flattened_eigen, hosvd, orthogonal_cp, CpOptions};
use mgsp_core::superpixel::SlicOptions;
use mgsp_core::{MgspError, MultilayerGraph, Representation, Tensor4};
use nalgebra::DMatrix;
use serde_json::json;

use crate::args::{
    BorderArg, Cli, Command, CompressArgs, DirectionArg, DumpArgs, EdgesArgs, KernelArg, OrderingArg,
    RepresentationArg, SegmentArgs, SpectraAction,
};
use crate::manifest::Manifest;
use crate::{CliError, CliResult};

pub(crate) fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Compress(a) => compress(a, cli),
        Command::Edges(a) => edges(a, cli),
        Command::Segment(a) => segment(a, cli),
        Command::Spectra {
            action: SpectraAction::Dump(a),
        } => spectra_dump(a, cli),
    }
}

/// Collects output files relative to the output directory.
struct OutDir<'a> {
    root: &'a Path,
    written: Vec<String>,
}

impl<'a> OutDir<'a> {
    fn create(root: &'a Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutDir {
            root,
            written: Vec::new(),
        })
    }

    fn path(&mut self, rel: &str) -> CliResult<std::path::PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        self.written.push(rel.to_string());
        Ok(p)
    }

    fn text(&mut self, rel: &str, text: &str) -> CliResult<()> {
        let p = self.path(rel)?;
        fs::write(p, text)?;
        Ok(())
    }
}

/// Shortest round-trip decimal, switching to exponent form for tiny or huge
/// magnitudes.
fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn load_rgb(path: &Path) -> CliResult<RgbImage> {
    RgbImage::load(path).map_err(|e| CliError::io(format!("cannot read image {}: {e}", path.display())))
}

fn compress(a: &CompressArgs, cli: &Cli) -> CliResult<()> {
    let methods: Vec<CompressionMethod> = a.methods.iter().map(|m| m.parse()).collect::<Result<_, MgspError>>()?;
    if methods.is_empty() || a.fractions.is_empty() {
        return Err(CliError::param("need at least one method and one fraction"));
    }
    if let Some(f) = a.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(CliError::param(format!("sampling fraction must lie in (0, 1], got {f}")));
    }
    let img = load_rgb(&a.input)?;
    let config = CompressionConfig {
        fractions: a.fractions.clone(),
        direction: match a.direction {
            DirectionArg::BlockWise => Direction::BlockWise,
            DirectionArg::LayerWise => Direction::LayerWise,
            DirectionArg::EntityWise => Direction::EntityWise,
        },
        ordering: match a.ordering {
            OrderingArg::CoefficientEnergy => CoefficientOrdering::CoefficientEnergy,
            OrderingArg::SpectralValue => CoefficientOrdering::SpectralValue,
        },
        block_layers: a.block_layers,
        cp: CpOptions {
            max_iter: a.cp_iters,
            ..CpOptions::default()
        },
    };

    let mut out = OutDir::create(&a.out)?;
    let mut manifest = Manifest::new("compress", cli.seed, cli.jobs);
    manifest.input("image", &a.input);
    manifest.param("methods", methods.iter().map(|m| m.name()).collect::<Vec<_>>());
    manifest.param("fractions", &config.fractions);
    manifest.param("direction", config.direction);
    manifest.param("ordering", config.ordering);
    manifest.param("block_layers", config.block_layers);
    manifest.param("cp_max_iter", config.cp.max_iter);
    manifest.param("cp_tol", config.cp.tol);
    manifest.result("height", img.height());
    manifest.result("width", img.width());

    let mut csv = String::from("fraction,method,mse,psnr\n");
    let mut curves = Vec::new();
    for method in methods {
        let report = compress_rgb(&img, method, &config)?;
        let mut points = Vec::new();
        for p in &report.points {
            let stem = format!("{}_f{}", method.name(), p.fraction);
            p.recovered.save(&out.path(&format!("recovered/{stem}.png"))?)?;
            if let Some(payload) = &p.payload {
                let mut bytes = Vec::new();
                payload.write_to(&mut bytes)?;
                fs::write(out.path(&format!("payloads/{stem}.mgsp"))?, bytes)?;
            }
            let _ = writeln!(csv, "{},{},{},{}", p.fraction, method.name(), num(p.quality.mse), num(p.quality.psnr));
            points.push(json!({
                "fraction": p.fraction,
                "budget": p.budget,
                "kept": p.kept,
                "achieved_fraction": p.achieved_fraction,
                "block": p.block.map(|(pp, q)| [pp, q]),
                "mse": p.quality.mse,
                "psnr": p.quality.psnr,
            }));
        }
        curves.push(json!({
            "method": method.name(),
            "cp_relative_residual": report.cp_residual,
            "points": points,
        }));
    }
    out.text("curves.csv", &csv)?;
    manifest.result("curves", curves);
    manifest.outputs = out.written;
    manifest.write(&a.out)
}

fn parse_threshold(s: &str) -> CliResult<ThresholdPolicy> {
    let s = s.trim().to_ascii_lowercase();
    let bad = || CliError::param(format!("threshold must be percentile:P, fixed:T or otsu, got '{s}'"));
    if s == "otsu" {
        return Ok(ThresholdPolicy::Otsu);
    }
    let (kind, value) = s.split_once(':').ok_or_else(bad)?;
    let v: f64 = value.parse().map_err(|_| bad())?;
    match kind {
        "percentile" if (0.0..=100.0).contains(&v) => Ok(ThresholdPolicy::Percentile(v)),
        "fixed" if v >= 0.0 && v.is_finite() => Ok(ThresholdPolicy::Fixed(v)),
        _ => Err(bad()),
    }
}

fn field_csv(width: usize, field: &[f64]) -> String {
    let mut s = String::new();
    for row in field.chunks(width) {
        let cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn edges(a: &EdgesArgs, cli: &Cli) -> CliResult<()> {
    let threshold = parse_threshold(&a.threshold)?;
    let img = load_rgb(&a.input)?;
    let config = EdgeConfig {
        k: a.k,
        threshold,
        normalize_dc: !a.no_dc_normalize,
        border: match a.border {
            BorderArg::Replicate => BorderPolicy::Replicate,
            BorderArg::Zero => BorderPolicy::Zero,
        },
    };
    let variant = match a.kernel {
        KernelArg::C1 => KernelVariant::C1,
        KernelArg::C2 => KernelVariant::C2,
    };
    let panel = edge_detect_pipeline(&img, &config)?;

    let mut out = OutDir::create(&a.out)?;
    let mut manifest = Manifest::new("edges", cli.seed, cli.jobs);
    manifest.input("image", &a.input);
    manifest.param("k", config.k);
    manifest.param("kernel", variant);
    manifest.param("threshold", config.threshold);
    manifest.param("normalize_dc", config.normalize_dc);
    manifest.param("border", config.border);

    let mut maps = Vec::new();
    for (method, map) in &panel.maps {
        let name = format!("edges_{}.png", method.label().to_ascii_lowercase());
        save_binary_map(&out.path(&name)?, map.height, map.width, &map.edges)?;
        maps.push(json!({
            "label": method.label(),
            "file": name,
            "threshold": map.threshold,
            "edge_pixels": map.count(),
        }));
    }
    panel.image().save(&out.path("panel.png")?)?;
    let chosen = panel.get(EdgeMethod::for_kernel(variant));
    out.text("difference.csv", &field_csv(chosen.width, &chosen.field))?;

    manifest.result("height", img.height());
    manifest.result("width", img.width());
    manifest.result("maps", maps);
    manifest.result("panel_order", EdgeMethod::ALL.iter().map(|m| m.label()).collect::<Vec<_>>());
    manifest.result("difference_field", EdgeMethod::for_kernel(variant).label());
    manifest.outputs = out.written;
    manifest.write(&a.out)
}

/// Fixed categorical palette for label maps (label 1 takes the first entry).
const PALETTE: [[u8; 3]; 20] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
    [174, 199, 232],
    [255, 187, 120],
    [152, 223, 138],
    [255, 152, 150],
    [197, 176, 213],
    [196, 156, 148],
    [247, 182, 210],
    [199, 199, 199],
    [219, 219, 141],
    [158, 218, 229],
];

fn label_image(res: &SegmentationResult) -> RgbImage {
    RgbImage::from_fn(res.height, res.width, |r, c| {
        let l = res.labels[r * res.width + c];
        let rgb = PALETTE[(l.max(1) - 1) % PALETTE.len()];
        [rgb[0] as f64 / 255.0, rgb[1] as f64 / 255.0, rgb[2] as f64 / 255.0]
    })
}

fn load_cube(a: &SegmentArgs) -> CliResult<ImageCube> {
    let ext = a.cube.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let cube = match ext.as_deref() {
        Some("hdr") => ImageCube::read_envi(&a.cube, a.data.as_deref()),
        Some("csv") => fs::File::open(&a.cube)
            .map_err(MgspError::from)
            .and_then(|f| ImageCube::read_csv(std::io::BufReader::new(f))),
        _ => {
            return Err(CliError::io(format!(
                "{}: expected an ENVI .hdr or a .csv cube",
                a.cube.display()
            )))
        }
    };
    cube.map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", a.cube.display(), err.message);
        err
    })
}

fn segment(a: &SegmentArgs, cli: &Cli) -> CliResult<()> {
    let cube = load_cube(a)?;
    let truth = match &a.truth {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            let (h, w, labels) = read_label_csv(std::io::BufReader::new(f))?;
            if (h, w) != (cube.height(), cube.width()) {
                return Err(CliError::param(format!(
                    "ground truth is {h}x{w} but the cube is {}x{}",
                    cube.height(),
                    cube.width()
                )));
            }
            Some(labels)
        }
        None => None,
    };
    let config = SegmentationConfig {
        layers: a.layers,
        superpixels: a.superpixels,
        restarts: a.restarts,
        slic: SlicOptions {
            compactness: a.compactness,
            ..SlicOptions::default()
        },
        gaussian: GaussianOptions {
            sigma_intra: a.sigma_intra,
            sigma_inter: a.sigma_inter,
            knn: a.knn,
            ..GaussianOptions::default()
        },
        ..SegmentationConfig::new(a.segments, cli.seed)
    };

    let mgsp = segment_hsi(&cube, &config)?;
    let kmeans = kmeans_baseline(&cube, &config)?;
    let gsp = gsp_baseline(&cube, &config)?;

    let mut out = OutDir::create(&a.out)?;
    let mut manifest = Manifest::new("segment", cli.seed, cli.jobs);
    manifest.input("cube", &a.cube);
    if let Some(d) = &a.data {
        manifest.input("data", d);
    }
    if let Some(t) = &a.truth {
        manifest.input("truth", t);
    }
    manifest.param("M", config.layers);
    manifest.param("N", config.superpixels);
    manifest.param("Q", config.segments);
    manifest.param("tol", a.tol);
    manifest.param("compactness", config.slic.compactness);
    manifest.param("slic_iterations", config.slic.iterations);
    manifest.param("knn", config.gaussian.knn);
    manifest.param("sigma_intra", config.gaussian.sigma_intra);
    manifest.param("sigma_inter", config.gaussian.sigma_inter);
    manifest.param("restarts", config.restarts);
    manifest.param("baseline_restarts", config.baseline_restarts);

    let mut table = String::from(if truth.is_some() { "method,Q,P,accuracy\n" } else { "method,Q,P\n" });
    let mut methods = Vec::new();
    for (res, file) in [(&kmeans, "kmeans"), (&gsp, "gsp"), (&mgsp, "mgsp")] {
        let name = format!("labels_{file}.png");
        label_image(res).save(&out.path(&name)?)?;
        let acc = match &truth {
            Some(t) => Some(boundary_accuracy(res.height, res.width, &res.labels, t, a.tol)?),
            None => None,
        };
        let p = res.kept_vectors.map_or(String::new(), |p| p.to_string());
        match acc {
            Some(v) => writeln!(table, "{},{},{p},{}", res.method.label(), res.segments, num(v)),
            None => writeln!(table, "{},{},{p}", res.method.label(), res.segments),
        }
        .expect("string write");
        methods.push(json!({
            "method": res.method.label(),
            "labels": name,
            "P": res.kept_vectors,
            "accuracy": acc,
        }));
    }
    let mut csv = Vec::new();
    write_label_csv(&mut csv, mgsp.width, &mgsp.labels)?;
    fs::write(out.path("labels.csv")?, csv)?;
    save_binary_map(&out.path("boundary.png")?, mgsp.height, mgsp.width, &mgsp.boundary)?;
    out.text("accuracy.csv", &table)?;

    manifest.result("height", cube.height());
    manifest.result("width", cube.width());
    manifest.result("bands", cube.bands());
    manifest.result("methods", methods);
    manifest.result("entity_singular_values", &mgsp.entity_values);
    manifest.result("layer_assignment", &mgsp.layer_assignment);
    manifest.result("superpixels", mgsp.superpixels.as_ref().map(|s| s.count));
    manifest.outputs = out.written;
    manifest.write(&a.out)
}

fn matrix_csv(name: &str, m: &DMatrix<f64>) -> String {
    let mut s = format!("# {name} {}x{}\n", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let cells: Vec<String> = m.row(r).iter().map(|&v| num(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn load_tensor(a: &DumpArgs) -> CliResult<Tensor4> {
    let bytes = fs::read(&a.mlg).map_err(|e| CliError::io(format!("{}: {e}", a.mlg.display())))?;
    if bytes.starts_with(b"MLG4") {
        return Ok(Tensor4::read_binary(bytes.as_slice())?);
    }
    let repr = match a.representation {
        RepresentationArg::Adjacency => Representation::Adjacency,
        RepresentationArg::Laplacian => Representation::Laplacian,
    };
    let g = MultilayerGraph::read_edge_list(bytes.as_slice(), repr)?;
    Ok(g.representing_tensor().clone())
}

fn spectra_dump(a: &DumpArgs, cli: &Cli) -> CliResult<()> {
    let t = load_tensor(a)?;
    let (m, n) = t.mlg_dims()?;
    let report = check_undirected(&t, SYMMETRY_TOL);
    if !report.passed {
        return Err(MgspError::InvalidGraph(format!(
            "tensor is not undirected (max deviation {:e})",
            report.max_deviation
        ))
        .into());
    }
    let fact = hosvd(&t)?;
    let cp_opts = CpOptions {
        max_iter: a.cp_iters,
        ..CpOptions::default()
    };
    let cp = orthogonal_cp(&t, cp_opts)?;
    let eig = flattened_eigen(&t)?;

    let mut out = OutDir::create(&a.out)?;
    let mut bin = Vec::new();
    t.write_binary(&mut bin)?;
    fs::write(out.path("tensor.mlg4")?, bin)?;
    out.text("hosvd_layer_basis.csv", &matrix_csv("E_f hosvd", &fact.basis.layer_basis))?;
    out.text("hosvd_entity_basis.csv", &matrix_csv("E_e hosvd", &fact.basis.entity_basis))?;
    out.text("cp_layer_basis.csv", &matrix_csv("E_f cp", &cp.basis.layer_basis))?;
    out.text("cp_entity_basis.csv", &matrix_csv("E_e cp", &cp.basis.entity_basis))?;
    out.text("cp_weights.csv", &matrix_csv("lambda cp", &cp.weights))?;
    out.text("core.csv", &matrix_csv("core hosvd flattened", &fact.core.flatten()?))?;

    let mut values = String::from("basis,mode,index,value\n");
    for (basis, b) in [("hosvd", &fact.basis), ("cp", &cp.basis)] {
        for (mode, vals) in [("layer", &b.layer_values), ("entity", &b.entity_values)] {
            for (k, v) in vals.iter().enumerate() {
                let _ = writeln!(values, "{basis},{mode},{},{}", k + 1, num(*v));
            }
        }
    }
    out.text("values.csv", &values)?;

    let mut eig_csv = String::from("index,value\n");
    for (k, pair) in eig.iter().enumerate() {
        let _ = writeln!(eig_csv, "{},{}", k + 1, num(pair.value));
    }
    out.text("flattened_eigen.csv", &eig_csv)?;

    let ortho = json!({
        "hosvd": fact.basis.orthonormality_error(),
        "cp": cp.basis.orthonormality_error(),
    });
    let mut ortho_csv = String::from("basis,max_deviation\n");
    let _ = writeln!(ortho_csv, "hosvd,{}", num(fact.basis.orthonormality_error()));
    let _ = writeln!(ortho_csv, "cp,{}", num(cp.basis.orthonormality_error()));
    out.text("orthonormality.csv", &ortho_csv)?;

    let mut manifest = Manifest::new("spectra-dump", cli.seed, cli.jobs);
    manifest.input("mlg", &a.mlg);
    manifest.param("representation_for_edge_lists", format!("{:?}", a.representation).to_ascii_lowercase());
    manifest.param("cp_max_iter", cp_opts.max_iter);
    manifest.param("cp_tol", cp_opts.tol);
    manifest.result("layers", m);
    manifest.result("entities", n);
    manifest.result("orthonormality", ortho);
    manifest.result("cp_residual", cp.residual);
    manifest.result("cp_relative_residual", cp.relative_residual(&t));
    manifest.result("cp_initial_residual", cp.initial_residual);
    manifest.result("cp_iterations", cp.iterations);
    manifest.result("cp_converged", cp.converged);
    manifest.result(
        "hosvd_reconstruction_error",
        fact.reconstruct().max_abs_diff(&t),
    );
    manifest.outputs = out.written;
    manifest.write(&a.out)
}
