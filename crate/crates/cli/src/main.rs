use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use samspec_core::bench::{self, Matcher, Task, TransferBenchConfig};
use samspec_core::corpus::{self, DocLayout, Manifest, VocabMode, Vocabulary, BYTE_SEPARATOR};
use samspec_core::decode::{AuxConfig, DEFAULT_L_BIAS, DEFAULT_L_THRESHOLD, DEFAULT_TOPK};
use samspec_core::oracle::{NgramOracle, Oracle, ReplayOracle};
use samspec_core::{serialize, DecodeConfig, Sam, TokenId};

#[derive(Parser)]
#[command(name = "samspec", version, about = "Suffix-automaton speculative drafting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a static automaton from a corpus.
    Build(BuildArgs),
    /// Decode with drafting against a reference oracle.
    Decode(DecodeArgs),
    /// Run a benchmark suite.
    Bench(BenchArgs),
    /// Print structural statistics of a saved automaton.
    Stats(StatsArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Corpus files; each is one document unless --line-per-doc is set.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, default_value = "byte")]
    mode: VocabMode,
    /// Separator id. Defaults to 256 in byte mode and u32::MAX - 1 otherwise.
    #[arg(long)]
    sep_id: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_TOPK)]
    topk: usize,
    /// Treat every non-blank line as a document.
    #[arg(long)]
    line_per_doc: bool,
    /// Output file; the manifest goes next to it with a `.json` suffix.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    prompt_file: PathBuf,
    /// `replay:<file>` replays the file's tokens after the prompt;
    /// `ngram:<order>:<corpus>` trains a k-gram lookup model on a corpus file.
    #[arg(long)]
    oracle: String,
    /// Static automaton file, or `none`.
    #[arg(long, default_value = "none")]
    sam: String,
    /// `recycle` or `none`.
    #[arg(long, default_value = "recycle")]
    aux: String,
    /// Vocabulary mode; must agree with the automaton's manifest when given.
    #[arg(long)]
    mode: Option<VocabMode>,
    #[arg(long)]
    no_dynamic: bool,
    #[arg(long, default_value_t = 40)]
    draft_len: usize,
    /// Node budget of static tree drafts; defaults to the draft length.
    #[arg(long)]
    tree_size: Option<usize>,
    /// Defaults to 5, or 0 when the auxiliary drafter is off.
    #[arg(long, allow_negative_numbers = true)]
    l_bias: Option<i64>,
    #[arg(long, default_value_t = DEFAULT_L_THRESHOLD, allow_negative_numbers = true)]
    l_threshold: i64,
    #[arg(long, default_value_t = 512)]
    max_new: usize,
    /// Output file for the generated text; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// `transfer` or `decode`.
    #[arg(long)]
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reference lengths for the transfer suite.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Matchers for the transfer suite.
    #[arg(long, value_delimiter = ',')]
    matchers: Option<Vec<Matcher>>,
    /// Tasks for the decode suite.
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<Task>>,
    #[arg(long, default_value_t = 40)]
    draft_len: usize,
    /// `recycle` or `none`.
    #[arg(long, default_value = "recycle")]
    aux: String,
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    sam: PathBuf,
    /// Number of highest-degree states to list.
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long)]
    json: bool,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SAMSPEC_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(args) => build(args),
        Command::Decode(args) => decode(args),
        Command::Bench(args) => run_bench(args),
        Command::Stats(args) => stats(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn manifest_path(sam: &Path) -> PathBuf {
    let mut s = sam.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn default_separator(mode: VocabMode) -> TokenId {
    match mode {
        VocabMode::Byte => BYTE_SEPARATOR,
        _ => TokenId(u32::MAX - 1),
    }
}

fn build(args: BuildArgs) -> Result<()> {
    let sep = args.sep_id.map(TokenId).unwrap_or(default_separator(args.mode));
    let mut vocab = Vocabulary::new(args.mode, sep);
    let layout = if args.line_per_doc {
        DocLayout::LinePerDoc
    } else {
        DocLayout::FilePerDoc
    };
    let (sam, manifest) = corpus::ingest::<f64>(&args.input, layout, &mut vocab, args.topk)?;
    serialize::save_to_file(&sam, &args.out)?;
    let json = serde_json::to_string_pretty(&manifest)?;
    let mpath = manifest_path(&args.out);
    std::fs::write(&mpath, &json).with_context(|| format!("writing {}", mpath.display()))?;
    log::info!("wrote {} and {}", args.out.display(), mpath.display());
    println!("{json}");
    Ok(())
}

fn read_manifest(sam: &Path) -> Result<Manifest> {
    let path = manifest_path(sam);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_tokens(path: &Path, vocab: &mut Vocabulary) -> Result<Vec<TokenId>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(vocab.tokenize(&text)?)
}

fn build_oracle(spec: &str, prompt_len: usize, vocab: &mut Vocabulary) -> Result<Box<dyn Oracle>> {
    if let Some(file) = spec.strip_prefix("replay:") {
        let stream = read_tokens(Path::new(file), vocab)?;
        return Ok(Box::new(ReplayOracle::new(prompt_len, stream)));
    }
    if let Some(rest) = spec.strip_prefix("ngram:") {
        let (order, file) = rest
            .split_once(':')
            .context("expected ngram:<order>:<corpus>")?;
        let order: usize = order.parse().context("ngram order")?;
        if order == 0 {
            bail!("ngram order must be at least 1");
        }
        let docs: Vec<Vec<TokenId>> = corpus::read_documents(&[file], DocLayout::FilePerDoc)?
            .iter()
            .map(|d| vocab.tokenize(d))
            .collect::<samspec_core::Result<_>>()?;
        return Ok(Box::new(NgramOracle::train(order, &docs, None)));
    }
    bail!("unknown oracle {spec:?}; expected replay:<file> or ngram:<order>:<corpus>")
}

fn aux_config(aux: &str) -> Result<Option<AuxConfig>> {
    match aux {
        "recycle" => Ok(Some(AuxConfig::default())),
        "none" => Ok(None),
        other => bail!("unknown auxiliary drafter {other:?}; expected recycle or none"),
    }
}

fn decode(args: DecodeArgs) -> Result<()> {
    let (static_sam, mut vocab) = if args.sam == "none" {
        let mode = args.mode.unwrap_or(VocabMode::Byte);
        (None, Vocabulary::new(mode, default_separator(mode)))
    } else {
        let path = Path::new(&args.sam);
        let manifest = read_manifest(path)?;
        if let Some(mode) = args.mode {
            if mode != manifest.vocab_mode {
                bail!(
                    "vocabulary mode {} does not match the automaton's {}",
                    mode.name(),
                    manifest.vocab_mode.name()
                );
            }
        }
        let vocab = manifest.vocabulary();
        if vocab.hash() != manifest.vocab_hash {
            bail!("manifest vocabulary hash mismatch for {}", path.display());
        }
        let sam: Sam = serialize::load_from_file(path)?;
        (Some(sam), vocab)
    };

    let aux = aux_config(&args.aux)?;
    let l_bias = args
        .l_bias
        .unwrap_or(if aux.is_some() { DEFAULT_L_BIAS } else { 0 });
    let config = DecodeConfig {
        draft_len: args.draft_len,
        tree_size: args.tree_size.unwrap_or(args.draft_len),
        use_dynamic: !args.no_dynamic,
        use_static: static_sam.is_some(),
        aux,
        l_bias,
        l_threshold: args.l_threshold,
        max_new_tokens: args.max_new,
    };

    let prompt = read_tokens(&args.prompt_file, &mut vocab)?;
    let mut oracle = build_oracle(&args.oracle, prompt.len(), &mut vocab)?;
    let (output, metrics) = samspec_core::decode(&prompt, oracle.as_mut(), static_sam.as_ref(), &config)?;

    let text = vocab.detokenize(&output);
    match &args.out {
        Some(path) => std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    let json = serde_json::to_string_pretty(&metrics.to_json())?;
    match &args.metrics_out {
        Some(path) => std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?,
        None => eprintln!("{json}"),
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let json = match args.suite.as_str() {
        "transfer" => {
            let defaults = TransferBenchConfig::default();
            let config = TransferBenchConfig {
                sizes: args.sizes.unwrap_or(defaults.sizes),
                matchers: args.matchers.unwrap_or(defaults.matchers),
                seed: args.seed,
                ..defaults
            };
            let report = bench::run_transfer_bench(&config);
            print!("{}", report.to_text());
            serde_json::to_string_pretty(&report)?
        }
        "decode" => {
            let tasks = args.tasks.unwrap_or(Task::ALL.to_vec());
            let aux = aux_config(&args.aux)?;
            let l_bias = if aux.is_some() { DEFAULT_L_BIAS } else { 0 };
            let config = DecodeConfig {
                draft_len: args.draft_len,
                tree_size: args.draft_len,
                aux,
                l_bias,
                ..DecodeConfig::default()
            };
            let reports = bench::run_decode_suite(&tasks, args.seed, &config)?;
            print!("{}", bench::decode_suite_text(&reports));
            serde_json::to_string_pretty(&reports)?
        }
        other => bail!("unknown suite {other:?}; expected transfer or decode"),
    };
    if let Some(path) = &args.json_out {
        std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn stats(args: StatsArgs) -> Result<()> {
    let sam: Sam = serialize::load_from_file(&args.sam)?;
    let mut by_degree: Vec<usize> = (0..sam.node_count()).collect();
    by_degree.sort_by_key(|&i| (std::cmp::Reverse(sam.nodes()[i].next().len()), i));
    by_degree.truncate(args.top);
    let top: Vec<serde_json::Value> = by_degree
        .iter()
        .map(|&i| {
            let n = &sam.nodes()[i];
            serde_json::json!({
                "node": i,
                "degree": n.next().len(),
                "length": n.length(),
                "freq": n.freq(),
            })
        })
        .collect();
    let summary = serde_json::json!({
        "nodes": sam.node_count(),
        "edges": sam.transition_count(),
        "clones": sam.clone_count(),
        "max_length": sam.max_length(),
        "vocab_size": sam.vocab_size(),
        "separator": sam.separator().map(|t| t.0),
        "top_degree": top,
    });
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
        return Ok(());
    }
    println!("nodes       {}", sam.node_count());
    println!("edges       {}", sam.transition_count());
    println!("clones      {}", sam.clone_count());
    println!("max_length  {}", sam.max_length());
    println!("vocab_size  {}", sam.vocab_size());
    match sam.separator() {
        Some(t) => println!("separator   {t}"),
        None => println!("separator   none"),
    }
    println!("top-degree states:");
    for v in &top {
        println!(
            "  node {:>8}  degree {:>6}  length {:>8}  freq {:>8}",
            v["node"], v["degree"], v["length"], v["freq"]
        );
    }
    Ok(())
}
