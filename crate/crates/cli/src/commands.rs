use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use tmfocus::anon::{AnonKey, AnonTable, CryptoPan, Identity, KEY_FILE_ENV};
use tmfocus::archive::analysis::{write_analysis, AnalysisFormat};
use tmfocus::archive::{read_archive, write_archive, MatrixBlob, WINDOWS_PER_ARCHIVE};
use tmfocus::calibration::{fit_zipf_mandelbrot, plot_rows, DegreeHistogram};
use tmfocus::detection::{cut_grid, fdmax, model_curves, roc_curve, RocVariant, FIG_DEFAULTS};
use tmfocus::hierarchy::aggregate_hierarchy;
use tmfocus::ingest::{
    synth_traffic, window_packets, PacketRecord, PacketWindow, PcapReader, PcapWriter, SynthSpec, Windower,
};
use tmfocus::pipeline::{analyze_hierarchy, build_matrix, build_windows, split_by_ranges, AnonMode};
use tmfocus::ranges::{
    byteswap_view, discriminate_endianness, discriminate_endianness_matrices, EndiannessReport, RangeId, RangePartition,
};
use tmfocus::{Error, HypersparseMatrix, Result};

use crate::{
    AnalysisFormatArg, AnalyzeArgs, AnonArg, ArchiveInput, BenchArgs, BuildArgs, CalibrateArgs, EndianArg, FocusArgs,
    KeyArgs, Mix, RocArgs, SynthArgs,
};

fn is_stdio(p: &Path) -> bool {
    p.as_os_str() == "-"
}

fn create_output(path: &Path) -> Result<Box<dyn Write>> {
    if is_stdio(path) {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

/// Tags an I/O error with the file it concerns.
fn with_path(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn load_partition(path: Option<&Path>) -> Result<RangePartition> {
    match path {
        Some(p) => RangePartition::parse_config(&fs::read_to_string(p).map_err(with_path(p))?),
        None => Ok(RangePartition::example()),
    }
}

fn load_key(args: &KeyArgs) -> Result<AnonKey> {
    match &args.key_file {
        Some(p) => AnonKey::from_file(p).map_err(|e| match e {
            Error::Io(io) => with_path(p)(io),
            e => e,
        }),
        None if std::env::var_os(KEY_FILE_ENV).is_some() => AnonKey::from_env(),
        None => Err(Error::Parameter(format!(
            "anonymization needs a key: pass --key-file or set {KEY_FILE_ENV}"
        ))),
    }
}

fn check_nv(nv: u64) -> Result<usize> {
    if nv < 1 << 10 || !nv.is_power_of_two() {
        return Err(Error::Parameter(format!(
            "--nv {nv} must be a power of two of at least 1024"
        )));
    }
    Ok(nv as usize)
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let part = load_partition(a.ranges.as_deref())?;
    let mut spec = match a.mix {
        Mix::Gateway => SynthSpec::gateway(a.count, a.seed),
        Mix::Uniform => SynthSpec::uniform(a.count, a.seed, &part),
    };
    spec.alpha = a.alpha;
    spec.delta = a.delta;
    spec.n_src = a.pool;
    spec.n_dst = a.pool;
    let records = synth_traffic(&spec, &part)?;
    let mut w = PcapWriter::new(create_output(&a.output)?)?;
    for r in &records {
        w.write_record(r)?;
    }
    w.finish()?.flush()?;
    Ok(())
}

/// Records from several captures back to back, with skip and truncation
/// totals.
struct CaptureStream {
    pending: std::vec::IntoIter<PathBuf>,
    current: Option<PcapReader<Box<dyn Read>>>,
    skipped: u64,
    truncated: Vec<PathBuf>,
    current_path: PathBuf,
}

impl CaptureStream {
    fn new(mut inputs: Vec<PathBuf>) -> Self {
        if inputs.is_empty() {
            inputs.push(PathBuf::from("-"));
        }
        CaptureStream {
            pending: inputs.into_iter(),
            current: None,
            skipped: 0,
            truncated: Vec::new(),
            current_path: PathBuf::new(),
        }
    }

    fn open(path: &Path) -> Result<PcapReader<Box<dyn Read>>> {
        let input: Box<dyn Read> = if is_stdio(path) {
            Box::new(BufReader::with_capacity(1 << 20, io::stdin()))
        } else {
            Box::new(BufReader::with_capacity(
                1 << 20,
                File::open(path).map_err(with_path(path))?,
            ))
        };
        PcapReader::new(input).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    fn finish_current(&mut self) {
        if let Some(r) = self.current.take() {
            self.skipped += r.skipped();
            if r.truncated() {
                self.truncated.push(self.current_path.clone());
            }
        }
    }
}

impl Iterator for CaptureStream {
    type Item = Result<PacketRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(r) = &mut self.current {
                match r.next() {
                    Some(item) => return Some(item),
                    None => self.finish_current(),
                }
            }
            let path = self.pending.next()?;
            match Self::open(&path) {
                Ok(r) => {
                    self.current = Some(r);
                    self.current_path = path;
                }
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

fn swap_window(w: &mut PacketWindow) {
    w.records = byteswap_view(&w.records);
}

pub fn build(a: BuildArgs) -> Result<()> {
    let nv = check_nv(a.nv)?;
    let mode = match a.anon {
        AnonArg::Off => AnonMode::Off,
        AnonArg::Direct => AnonMode::Direct,
        AnonArg::Table => AnonMode::Table,
    };
    let pan = match mode {
        AnonMode::Off => None,
        _ => Some(CryptoPan::new(&load_key(&a.key)?)),
    };
    let part = load_partition(a.ranges.as_deref())?;
    fs::create_dir_all(&a.out_dir)?;

    let mut stream = CaptureStream::new(a.inputs);
    let mut swap = a.endianness == EndianArg::Little;
    let mut decided = a.endianness != EndianArg::Auto;
    let (mut batch, mut archives, mut full, mut partial_kept, mut partial_dropped) =
        (Vec::new(), 0usize, 0u64, 0u64, 0u64);

    let mut flush = |batch: &mut Vec<PacketWindow>, last: bool| -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let blobs = build_windows(batch, mode, pan.as_ref())?;
        let path = a.out_dir.join(format!("archive-{archives:05}.tar"));
        write_archive(&blobs, &path, last)?;
        archives += 1;
        batch.clear();
        Ok(())
    };

    for window in Windower::new(&mut stream, nv)? {
        let mut window = window?;
        if !decided {
            let rep = discriminate_endianness(&window.records, &part)?;
            eprintln!(
                "endianness: score big-endian {:.4}, little-endian {:.4}, using {}",
                rep.score_big,
                rep.score_little,
                rep.verdict.label()
            );
            swap = rep.verdict == tmfocus::ranges::Endianness::Little;
            decided = true;
        }
        if window.is_partial {
            if !a.include_partial {
                partial_dropped += 1;
                continue;
            }
            partial_kept += 1;
        } else {
            full += 1;
        }
        if swap {
            swap_window(&mut window);
        }
        batch.push(window);
        if batch.len() == WINDOWS_PER_ARCHIVE {
            flush(&mut batch, false)?;
        }
    }
    flush(&mut batch, true)?;
    stream.finish_current();

    eprintln!(
        "windows: {full} full, {partial_kept} partial archived, {partial_dropped} partial dropped; archives: {archives}; skipped frames: {}",
        stream.skipped
    );
    for p in &stream.truncated {
        eprintln!("warning: {} ends inside a packet record", p.display());
    }
    Ok(())
}

struct LoadedArchives {
    leaves: Vec<HypersparseMatrix>,
    partition: RangePartition,
    partial_skipped: usize,
}

fn load_archives(input: &ArchiveInput) -> Result<LoadedArchives> {
    let mut blobs: Vec<MatrixBlob> = Vec::new();
    for p in &input.archives {
        if !p.exists() {
            return Err(with_path(p)(io::Error::from(io::ErrorKind::NotFound)));
        }
        blobs.extend(read_archive(p)?);
    }
    if blobs
        .windows(2)
        .any(|w| w[0].meta.window_index >= w[1].meta.window_index)
    {
        return Err(Error::Parameter("archives must be given in window order".into()));
    }
    let anonymized = blobs.first().is_some_and(|b| b.meta.anonymized);
    if blobs.iter().any(|b| b.meta.anonymized != anonymized) {
        return Err(Error::Format("archives mix anonymized and plain windows".into()));
    }
    let mut partition = load_partition(input.ranges.as_deref())?;
    if anonymized && !input.ranges_anonymized {
        let pan = CryptoPan::new(&load_key(&input.key)?);
        partition = partition.anonymized(&pan)?;
    }
    let total = blobs.len();
    let leaves: Vec<HypersparseMatrix> = blobs
        .into_iter()
        .filter(|b| !b.meta.partial)
        .map(|b| b.matrix)
        .collect();
    Ok(LoadedArchives {
        partial_skipped: total - leaves.len(),
        leaves,
        partition,
    })
}

fn hierarchy_depth(requested: usize, leaves: usize) -> Result<usize> {
    if requested == 0 {
        return Err(Error::Parameter("--levels must be at least 1".into()));
    }
    if leaves == 0 {
        return Err(Error::InsufficientData("no full windows in the archives".into()));
    }
    Ok((requested - 1).min(leaves.ilog2() as usize))
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let loaded = load_archives(&a.input)?;
    let max_level = hierarchy_depth(a.levels, loaded.leaves.len())?;
    let levels = aggregate_hierarchy(loaded.leaves, max_level)?;
    let rows = analyze_hierarchy(&levels, &loaded.partition)?;
    let format = match a.format {
        Some(AnalysisFormatArg::Csv) => AnalysisFormat::Csv,
        Some(AnalysisFormatArg::Binary) => AnalysisFormat::Binary,
        None => AnalysisFormat::from_path(&a.output),
    };
    write_analysis(&rows, &a.output, format)?;
    eprintln!(
        "levels: {}; rows: {}; partial windows skipped: {}",
        levels.len(),
        rows.len(),
        loaded.partial_skipped
    );
    Ok(())
}

fn print_focus(out: &mut dyn Write, rep: &EndiannessReport) -> io::Result<()> {
    for (title, t) in [
        ("big-endian", &rep.big),
        ("little-endian", &rep.little),
        ("random expectation", &rep.expected),
    ] {
        writeln!(out, "# {title}")?;
        write!(out, "{}", t.to_csv())?;
    }
    writeln!(out, "score big-endian {:.6}", rep.score_big)?;
    writeln!(out, "score little-endian {:.6}", rep.score_little)?;
    writeln!(out, "verdict {}", rep.verdict.label())
}

pub fn focus(a: FocusArgs) -> Result<()> {
    let is_archive = |p: &PathBuf| p.extension().is_some_and(|e| e == "tar");
    let archives = a.inputs.iter().filter(|p| is_archive(p)).count();
    let rep = if archives == 0 {
        let part = load_partition(a.ranges.as_deref())?;
        let records = CaptureStream::new(a.inputs).collect::<Result<Vec<_>>>()?;
        discriminate_endianness(&records, &part)?
    } else if archives == a.inputs.len() {
        let loaded = load_archives(&ArchiveInput {
            archives: a.inputs,
            ranges: a.ranges,
            ranges_anonymized: a.ranges_anonymized,
            key: a.key,
        })?;
        discriminate_endianness_matrices(&loaded.leaves, &loaded.partition)?
    } else {
        return Err(Error::Parameter(
            "focus inputs must be all captures or all archives".into(),
        ));
    };
    let mut out = io::stdout().lock();
    print_focus(&mut out, &rep)?;
    if let Some(p) = &a.csv {
        let mut w = BufWriter::new(File::create(p)?);
        writeln!(w, "table,src_range,dst_range,value")?;
        for (name, t) in [("big", &rep.big), ("little", &rep.little), ("expected", &rep.expected)] {
            for s in RangeId::ALL {
                for d in RangeId::ALL {
                    writeln!(w, "{name},{s},{d},{:?}", t.get(s, d))?;
                }
            }
        }
        writeln!(w, "score_big,all,all,{:?}", rep.score_big)?;
        writeln!(w, "score_little,all,all,{:?}", rep.score_little)?;
        w.flush()?;
    }
    if let Some(p) = &a.json {
        let text = serde_json::to_string_pretty(&rep).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(p, text + "\n")?;
    }
    Ok(())
}

fn range_label(r: Option<RangeId>) -> &'static str {
    r.map_or("all", RangeId::name)
}

pub fn calibrate(a: CalibrateArgs) -> Result<()> {
    let loaded = load_archives(&a.input)?;
    let max_level = hierarchy_depth(a.levels, loaded.leaves.len())?;
    let levels = aggregate_hierarchy(loaded.leaves, max_level)?;
    fs::create_dir_all(&a.out_dir)?;
    let mut hist = BufWriter::new(File::create(a.out_dir.join("histograms.csv"))?);
    let mut fits = BufWriter::new(File::create(a.out_dir.join("fits.csv"))?);
    let mut plot = BufWriter::new(File::create(a.out_dir.join("plot.csv"))?);
    writeln!(hist, "window_nv,src_range,dst_range,d,links")?;
    writeln!(
        fits,
        "window_nv,src_range,dst_range,links,packets,delta,alpha,d_max,fit_error"
    )?;
    writeln!(plot, "window_nv,src_range,dst_range,d,empirical,model")?;
    let mut out = io::stdout().lock();
    for level in &levels {
        let nv = level.window_packets;
        let mut directions: Vec<(Option<(RangeId, RangeId)>, DegreeHistogram)> =
            vec![(None, DegreeHistogram::default().with_window(nv, None))];
        for s in RangeId::ALL {
            for d in RangeId::ALL {
                directions.push((Some((s, d)), DegreeHistogram::default().with_window(nv, Some((s, d)))));
            }
        }
        for m in &level.matrices {
            directions[0].1.add_matrix(m);
            let blocks = split_by_ranges(m, &loaded.partition);
            for (dir, h) in directions.iter_mut().skip(1) {
                let (s, d) = dir.unwrap();
                h.add_matrix(&blocks[s.index()][d.index()]);
            }
        }
        for (dir, h) in &directions {
            if h.is_empty() {
                continue;
            }
            let (s, d) = (range_label(dir.map(|x| x.0)), range_label(dir.map(|x| x.1)));
            for (deg, links) in &h.counts {
                writeln!(hist, "{nv},{s},{d},{deg},{links}")?;
            }
            let fit = match fit_zipf_mandelbrot(h) {
                Ok(f) => f,
                Err(Error::InsufficientData(_)) => continue,
                Err(e) => return Err(e),
            };
            writeln!(
                fits,
                "{nv},{s},{d},{},{},{:?},{:?},{},{:?}",
                h.links(),
                h.packets(),
                fit.delta,
                fit.alpha,
                fit.d_max,
                fit.fit_error
            )?;
            for (deg, emp, model) in plot_rows(h, &fit)? {
                writeln!(plot, "{nv},{s},{d},{deg},{emp:?},{model:?}")?;
            }
            if dir.is_none() {
                writeln!(
                    out,
                    "N_V {nv}: links {} delta {:.3} alpha {:.3} d_max {} error {:.3e}",
                    h.links(),
                    fit.delta,
                    fit.alpha,
                    fit.d_max,
                    fit.fit_error
                )?;
            }
        }
    }
    hist.flush()?;
    fits.flush()?;
    plot.flush()?;
    Ok(())
}

pub fn roc(a: RocArgs) -> Result<()> {
    let f = match a.f {
        Some(f) => f,
        None => fdmax(a.d_max)?,
    };
    let grid = cut_grid(a.c_err, a.grid);
    let mut out = create_output(&a.output)?;
    writeln!(out, "variant,c_err,c_cut,N_samp,f,p_fa,p_det")?;
    let variants = [
        (RocVariant::Baseline, 1, 1.0),
        (RocVariant::Coherent { n_samp: a.n_samp }, a.n_samp, 1.0),
        (RocVariant::MismatchAll { f }, 1, f),
        (RocVariant::MismatchNone { f }, 1, f),
    ];
    for (variant, n_samp, f) in variants {
        for p in roc_curve(a.c_err, &grid, variant)? {
            writeln!(
                out,
                "{variant},{:?},{:?},{n_samp},{f:?},{:?},{:?}",
                a.c_err, p.c_cut, p.p_fa, p.p_det
            )?;
        }
    }
    out.flush()?;
    if let Some(p) = &a.curves {
        let d: Vec<u64> = (1..=a.curve_dmax.max(1)).collect();
        let rows = model_curves(
            (FIG_DEFAULTS.zm_delta, FIG_DEFAULTS.zm_alpha),
            (FIG_DEFAULTS.gauss_mu, FIG_DEFAULTS.gauss_sigma),
            a.c_err,
            &d,
        )?;
        let mut w = BufWriter::new(File::create(p)?);
        writeln!(w, "d,p_zm,zm_lower,zm_upper,p_gauss,gauss_lower,gauss_upper")?;
        for r in rows {
            writeln!(
                w,
                "{},{:?},{:?},{:?},{:?},{:?},{:?}",
                r.d, r.p_zm, r.zm_lower, r.zm_upper, r.p_gauss, r.gauss_lower, r.gauss_upper
            )?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let nv = check_nv(a.nv)?;
    let part = RangePartition::example();
    let records = synth_traffic(&SynthSpec::gateway(a.packets, a.seed), &part)?;
    let windows = window_packets(records, nv)?;
    let pan = CryptoPan::new(&AnonKey::from_bytes([0x5A; 32]));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Parameter(e.to_string()))?;
    let time = |f: &(dyn Fn(&[PacketRecord]) -> HypersparseMatrix + Sync)| {
        pool.install(|| {
            let start = Instant::now();
            let n: u64 = windows.iter().map(|w| f(&w.records).packet_total()).sum();
            n as f64 / start.elapsed().as_secs_f64()
        })
    };
    let plain = time(&|r| build_matrix(r, &Identity));
    let table = time(&|r| build_matrix(r, &AnonTable::build(&pan, r.iter().flat_map(|x| [x.src, x.dst]))));
    let direct = time(&|r| build_matrix(r, &pan));
    let mut out = io::stdout().lock();
    if a.json {
        let report = serde_json::json!({
            "packets": a.packets,
            "window_nv": nv,
            "threads": 1,
            "plain_packets_per_s": plain,
            "table_packets_per_s": table,
            "direct_packets_per_s": direct,
            "table_slowdown": plain / table,
            "direct_slowdown": plain / direct,
        });
        writeln!(out, "{report}")?;
    } else {
        writeln!(out, "packets {} window_nv {nv} threads 1", a.packets)?;
        writeln!(out, "plain  {plain:.4e} packets/s")?;
        writeln!(out, "table  {table:.4e} packets/s ({:.2}x slower)", plain / table)?;
        writeln!(out, "direct {direct:.4e} packets/s ({:.2}x slower)", plain / direct)?;
    }
    Ok(())
}
