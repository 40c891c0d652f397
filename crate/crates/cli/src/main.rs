//! `profinite`: command-line front end for profinite-core.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::Format;

#[derive(Parser, Debug)]
#[command(name = "profinite", version, about = "Finite-level computations for rational equivariant algebra over profinite groups")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Emit JSON (`"schema": 1`)
    #[arg(long, global = true, conflicts_with_all = ["tsv", "pretty"])]
    pub json: bool,
    /// Emit tab-separated tables
    #[arg(long, global = true, conflicts_with = "pretty")]
    pub tsv: bool,
    /// Human-readable output (the default)
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Seed for randomized batteries
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Re-load emitted certificates and re-verify them
    #[arg(long, global = true)]
    pub verify: bool,
}

impl Global {
    pub fn format(&self) -> Format {
        if self.json {
            Format::Json
        } else if self.tsv {
            Format::Tsv
        } else {
            Format::Pretty
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Finite groups and their subgroup lattices
    #[command(subcommand)]
    Group(GroupCmd),
    /// Towers of finite groups
    #[command(subcommand)]
    Tower(TowerCmd),
    /// Cantor-Bendixson rank and heights
    #[command(subcommand)]
    Cb(CbCmd),
    /// Burnside ring, marks and span bases
    #[command(subcommand)]
    Burnside(BurnsideCmd),
    /// Span composition and colimit witnesses
    #[command(subcommand)]
    Span(SpanCmd),
    /// Rational Mackey functors
    #[command(subcommand)]
    Mackey(MackeyCmd),
    /// Equivariant sheaves with periodic tails
    #[command(subcommand)]
    Sheaf(SheafCmd),
    /// Homological dimension certificates
    #[command(subcommand)]
    Homdim(HomdimCmd),
}

#[derive(Args, Debug, Clone)]
pub struct TowerArgs {
    /// `pro_p:P`, `trivial`, ...
    #[arg(long)]
    pub tower: String,
    #[arg(long, env = "PROFINITE_DEPTH", default_value_t = 6)]
    pub depth: usize,
}

#[derive(Subcommand, Debug)]
pub enum GroupCmd {
    /// Subgroups, conjugacy classes, cores and Weyl groups
    Info {
        #[arg(long)]
        group: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum TowerCmd {
    /// Level orders and subgroup counts
    Info(TowerArgs),
    /// Whether a subgroup point is isolated in the limit
    Stability {
        #[command(flatten)]
        tower: TowerArgs,
        #[arg(long)]
        level: usize,
        /// index of the subgroup in the level's canonical order
        #[arg(long)]
        index: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SpaceArgs {
    #[arg(long, conflicts_with_all = ["tree", "empty", "discrete"])]
    pub tower: Option<String>,
    #[arg(long, env = "PROFINITE_DEPTH", default_value_t = 6)]
    pub depth: usize,
    /// JSON tree `{"sizes": [...], "bonds": [[...]], "regions"?: [...]}`
    #[arg(long)]
    pub tree: Option<PathBuf>,
    #[arg(long)]
    pub empty: bool,
    /// `n` isolated points
    #[arg(long)]
    pub discrete: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum CbCmd {
    /// Rank certificate with the full derivative trace
    Rank(SpaceArgs),
    /// Heights of the deepest nodes
    Heights(SpaceArgs),
}

#[derive(Subcommand, Debug)]
pub enum BurnsideCmd {
    /// Table of marks
    Marks {
        #[arg(long)]
        group: String,
    },
    /// Structure constants of the Burnside ring
    Ring {
        #[arg(long)]
        group: String,
    },
    /// Transitive span classes between two transitive sets
    Hom {
        #[arg(long)]
        group: String,
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
    },
    /// Associativity of composition on seeded random triples
    Assoc {
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 200)]
        count: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum SpanCmd {
    /// Compose `first` then `second` from `{"group", "first", "second"}`
    Compose {
        #[arg(long)]
        file: PathBuf,
    },
    /// Whether `first` and `second` are isomorphic spans
    Equivalent {
        #[arg(long)]
        file: PathBuf,
    },
    /// Basis spans between transitive sets, in the compose file format
    Basis {
        #[arg(long)]
        group: String,
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
    },
    /// Colimit witnesses for every span class up to a level
    Colimit {
        #[arg(long)]
        tower: String,
        #[arg(long, default_value_t = 3)]
        level: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct PairArgs {
    #[arg(long)]
    pub group: String,
    /// `burnside`, `zero`, `representable:<class>`, `fixedpoint:<label>`
    #[arg(long = "M")]
    pub m: String,
    #[arg(long = "N")]
    pub n: String,
}

#[derive(Subcommand, Debug)]
pub enum MackeyCmd {
    /// dim Ext^degree(M, N)
    Ext {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = 1)]
        degree: usize,
    },
    /// dim Hom(M, N)
    Hom {
        #[command(flatten)]
        pair: PairArgs,
    },
    /// A functor's values and structure maps
    Show {
        #[arg(long)]
        group: String,
        #[arg(long = "M")]
        m: String,
    },
    /// Projective resolution by representables
    Resolve {
        #[arg(long)]
        group: String,
        #[arg(long = "M")]
        m: String,
        #[arg(long, default_value_t = 3)]
        length: usize,
    },
    /// Ext^1 over the battery and the Yoneda hom count
    Audit {
        #[arg(long)]
        group: String,
    },
    /// The functor to Weyl sheaves: hom dimensions and exactness
    Phi {
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum SheafCmd {
    /// Godement resolution
    Godement {
        /// `spzp`, `spzp:P[:D]`, `subgroups:SEL`, `discrete:N`, `sequence:SEL`
        #[arg(long)]
        base: String,
        /// `const:Q`, `sky:SITE`, `zero`, `random:SEED` or `file:PATH`
        #[arg(long)]
        sheaf: String,
        #[arg(long, default_value_t = 3)]
        stages: usize,
    },
    /// Ext in the periodic-tail class
    Ext {
        #[arg(long)]
        base: String,
        #[arg(long = "E")]
        e: String,
        #[arg(long = "F")]
        f: String,
        #[arg(long, default_value_t = 1)]
        degree: usize,
    },
    /// dim Hom(E, F)
    Hom {
        #[arg(long)]
        base: String,
        #[arg(long = "E")]
        e: String,
        #[arg(long = "F")]
        f: String,
    },
    /// Weyl condition
    Weyl {
        #[arg(long)]
        base: String,
        #[arg(long)]
        sheaf: String,
    },
    /// Parity witness at the limit point
    Parity {
        #[arg(long)]
        base: String,
        #[arg(long)]
        sheaf: String,
    },
    /// Non-split extension `0 -> sub -> X -> quotient -> 0`
    Extension {
        #[arg(long)]
        base: String,
        #[arg(long)]
        quotient: String,
        #[arg(long)]
        sub: String,
    },
    /// Stalk vanishing below height over seeded random sheaves
    Vanishing {
        /// comma-separated base descriptors
        #[arg(long, default_value = "spzp:2,spzp:3,sequence:cyclic:2,sequence:sym:3,discrete:3")]
        bases: String,
        #[arg(long, default_value_t = 24)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        stages: usize,
    },
    /// Re-verify a resolution or extension JSON file
    Verify {
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum HomdimCmd {
    /// Homological dimension certificate
    Certify {
        /// `finite:SEL`, `spzp:P`, `spzp-weyl`, `spzp-weyl:P`
        #[arg(long)]
        setup: String,
    },
    /// Re-verify a certificate file
    Verify {
        #[arg(long)]
        file: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(report) => {
            print!("{}", report.render(cli.global.format()));
            if report.verified == Some(false) {
                eprintln!("error: verification failed");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
