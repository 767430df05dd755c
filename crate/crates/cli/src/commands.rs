use std::borrow::Cow;
use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use sslstm::baselines::{nb_train, svm_train, Featurized, NbModel, SvmConfig, SvmModel};
use sslstm::dataio::{read_dataset, read_judgments, read_labeled_dataset, write_dataset, Conversation, Example, LabeledDataset};
use sslstm::datamine::{mine_by_response, mine_candidates, prune_heuristics, read_pairs, sample_negatives, write_judge_queue, JudgeRow};
use sslstm::embeddings::{cosine, EmbeddingTable};
use sslstm::metrics::{dataset_stats, mcnemar, EvaluationReport};
use sslstm::neural::SsLstm;
use sslstm::text_norm::{normalize_utterance, serialize, EmoticonLexicon, Token};
use sslstm::training::{gradient_check, load_checkpoint, read_container, save_checkpoint, split_dataset, train, TrainConfig};
use sslstm::{dataio, Classifier, Emotion};

use crate::*;

type Outcome = Result<(), Failure>;

pub(crate) fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Normalize(a) => normalize(a),
        Command::Split(a) => split(a),
        Command::Train(a) => train_cmd(*a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Embcos(a) => embcos(a),
        Command::Mine(a) => mine(a),
        Command::Stats(a) => stats(a),
        Command::Kappa(a) => kappa(a),
        Command::Gradcheck(a) => gradcheck(*a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("{}: {e}", path.display()),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("cannot create {}: {e}", path.display()),
    })
}

fn sink(out: &OutputArg) -> Result<Box<dyn Write>, Failure> {
    Ok(match &out.output {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(out: &OutputArg, text: &str) -> Outcome {
    let mut w = sink(out)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Failure::from_lib(destination(out), e.into()))
}

fn destination(out: &OutputArg) -> String {
    out.output.as_ref().map_or_else(|| "stdout".into(), |p| p.display().to_string())
}

fn in_file<T>(path: &Path, r: sslstm::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::from_lib(path.display(), e))
}

fn lexicon(arg: &LexiconArg) -> Result<Cow<'static, EmoticonLexicon>, Failure> {
    match &arg.lexicon {
        None => Ok(Cow::Borrowed(EmoticonLexicon::shipped())),
        Some(p) => in_file(p, EmoticonLexicon::from_reader(open(p)?)).map(Cow::Owned),
    }
}

fn table(path: &Path, name: &str) -> Result<Arc<EmbeddingTable>, Failure> {
    in_file(path, EmbeddingTable::load(name, open(path)?)).map(Arc::new)
}

fn tables(args: &EmbeddingArgs) -> Result<(Option<Arc<EmbeddingTable>>, Option<Arc<EmbeddingTable>>), Failure> {
    let sem = args.semantic.as_deref().map(|p| table(p, "semantic")).transpose()?;
    let sent = args.sentiment.as_deref().map(|p| table(p, "sentiment")).transpose()?;
    Ok((sem, sent))
}

fn labeled(path: &Path) -> Result<LabeledDataset, Failure> {
    in_file(path, read_labeled_dataset(open(path)?))
}

fn lines(path: &Path, lex: &EmoticonLexicon) -> Result<Vec<Vec<Token>>, Failure> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line.map_err(|e| Failure::from_lib(path.display(), e.into()))?;
        out.push(normalize_utterance(&line, lex));
    }
    Ok(out)
}

fn need<'a, T>(value: &'a Option<T>, flag: &str, why: &str) -> Result<&'a T, Failure> {
    value.as_ref().ok_or_else(|| Failure::usage(format!("{flag} is required {why}")))
}

fn normalize(a: NormalizeArgs) -> Outcome {
    let lex = lexicon(&a.lexicon)?;
    let mut text = String::new();
    match &a.input {
        Some(p) => {
            open(p)?
                .read_to_string(&mut text)
                .map_err(|e| Failure::from_lib(p.display(), e.into()))?;
        }
        None => {
            io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| Failure::from_lib("stdin", e.into()))?;
        }
    }
    let mut out = String::new();
    for line in text.lines() {
        out.push_str(&serialize(&normalize_utterance(line, &lex)));
        out.push('\n');
    }
    emit(&a.output, &out)
}

fn write_conversations(path: &Path, conversations: &[Conversation]) -> Outcome {
    let mut w = create(path)?;
    in_file(path, write_dataset(conversations, &mut w))?;
    w.flush().map_err(|e| Failure::from_lib(path.display(), e.into()))
}

fn split(a: SplitArgs) -> Outcome {
    let data = labeled(&a.data)?;
    let (tr, va) = split_dataset(&data, a.ratio, a.seed).map_err(|e| Failure::from_lib("--ratio", e))?;
    write_conversations(&a.train_out, tr.conversations())?;
    write_conversations(&a.valid_out, va.conversations())?;
    emit(&a.output, &format!("train\t{}\nvalidation\t{}\n", tr.len(), va.len()))
}

fn train_cmd(a: TrainArgs) -> Outcome {
    let (train_path, model_path) = (&a.train, &a.model);
    let lex = lexicon(&a.lexicon)?;
    let train_data = labeled(train_path)?;
    match a.kind {
        ModelKind::Nb => {
            let m = in_file(train_path, nb_train(&train_data.examples(&lex), a.alpha))?;
            let mut w = create(model_path)?;
            in_file(model_path, m.save(&mut w))?;
            w.flush().map_err(|e| Failure::from_lib(model_path.display(), e.into()))?;
            return emit(&a.output, &format!("nb\tvocabulary {}\n", m.vocabulary_size()));
        }
        ModelKind::Svm => {
            let cfg = SvmConfig {
                lambda: a.lambda,
                epochs: a.svm_epochs,
                seed: a.seed,
            };
            let m = in_file(train_path, svm_train(&train_data.examples(&lex), &lex, &cfg))?;
            let mut w = create(model_path)?;
            in_file(model_path, m.save(&mut w))?;
            w.flush().map_err(|e| Failure::from_lib(model_path.display(), e.into()))?;
            return emit(&a.output, &format!("svm\tfeatures {}\n", m.linear().dim()));
        }
        ModelKind::Sslstm => {}
    }

    let (tr, va) = match &a.valid {
        Some(p) => (train_data, labeled(p)?),
        None => split_dataset(&train_data, a.split_ratio, a.seed).map_err(|e| Failure::from_lib("--split-ratio", e))?,
    };
    let (sem, sent) = tables(&a.embeddings)?;
    let config = a.net.config();
    let model = SsLstm::init(config, sem, sent, a.seed).map_err(|e| Failure::from_lib("model configuration", e))?;
    let tc = TrainConfig {
        learning_rate: a.lr,
        token_budget: a.token_budget,
        max_epochs: a.epochs,
        patience: a.patience,
        seed: a.seed,
        channels: a.net.channels,
        class_weights: a.class_weights,
        threads: a.parallel,
    };
    let (best, history) = train(&model, &tr.examples(&lex), &va.examples(&lex), &tc).map_err(|e| Failure::from_lib("training", e))?;
    let mut w = create(model_path)?;
    in_file(model_path, save_checkpoint(&best, &lex, &mut w))?;
    w.flush().map_err(|e| Failure::from_lib(model_path.display(), e.into()))?;
    emit(&a.output, &history.render_tsv())
}

/// Any checkpoint the CLI can score.
enum Loaded {
    Neural(SsLstm),
    Nb(NbModel),
    Svm(SvmModel),
}

fn load_model(path: &Path, embeddings: &EmbeddingArgs, lex: &EmoticonLexicon) -> Result<Loaded, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::from_lib(path.display(), e.into()))?;
    let container = in_file(path, read_container(&bytes[..]))?;
    match container.meta("model") {
        Some("sslstm") => {
            let (sem, sent) = tables(embeddings)?;
            let loaded = in_file(path, load_checkpoint(&bytes[..], sem, sent))?;
            if loaded.lexicon_hash != lex.content_hash() {
                return Err(Failure {
                    code: EXIT_DATA,
                    message: format!("{}: trained with a different emoticon lexicon than --lexicon provides", path.display()),
                });
            }
            Ok(Loaded::Neural(loaded.model))
        }
        Some("nb") => in_file(path, NbModel::from_container(container)).map(Loaded::Nb),
        Some("svm") => in_file(path, SvmModel::from_container(container)).map(Loaded::Svm),
        other => Err(Failure {
            code: EXIT_DATA,
            message: format!("{}: unknown model kind {other:?}", path.display()),
        }),
    }
}

fn predictions(model: &Loaded, lex: &EmoticonLexicon, inputs: &[Vec<Token>]) -> sslstm::Result<Vec<Emotion>> {
    let classifier: &dyn Classifier = match model {
        Loaded::Neural(m) => m,
        Loaded::Nb(m) => &Featurized { model: m, lexicon: lex },
        Loaded::Svm(m) => &Featurized { model: m, lexicon: lex },
    };
    inputs.iter().map(|t| classifier.classify(t)).collect()
}

fn eval(a: EvalArgs) -> Outcome {
    let lex = lexicon(&a.lexicon)?;
    let data = labeled(&a.data)?;
    let examples: Vec<Example> = data.examples(&lex);
    let inputs: Vec<Vec<Token>> = examples.iter().map(|e| e.tokens.clone()).collect();
    let golds: Vec<Emotion> = examples.iter().map(|e| e.label).collect();

    let model = load_model(&a.model, &a.embeddings, &lex)?;
    let preds = predictions(&model, &lex, &inputs).map_err(|e| Failure::from_lib(a.model.display(), e))?;
    let mut report = EvaluationReport::from_predictions(&preds, &golds).map_err(|e| Failure::from_lib(a.data.display(), e))?;
    if let Some(other) = &a.compare_model {
        let m = load_model(other, &a.embeddings, &lex)?;
        let theirs = predictions(&m, &lex, &inputs).map_err(|e| Failure::from_lib(other.display(), e))?;
        let hit = |p: &[Emotion]| p.iter().zip(&golds).map(|(p, g)| p == g).collect::<Vec<_>>();
        report.mcnemar = Some(mcnemar(&hit(&preds), &hit(&theirs)).map_err(|e| Failure::from_lib(other.display(), e))?);
    }
    let text = match a.format {
        ReportFormat::Text => report.render_text(),
        ReportFormat::Tsv => report.render_tsv(),
    };
    emit(&a.output, &text)
}

fn predict(a: PredictArgs) -> Outcome {
    let lex = lexicon(&a.lexicon)?;
    let mut conversations = in_file(&a.data, read_dataset(open(&a.data)?))?;
    let model = load_model(&a.model, &a.embeddings, &lex)?;
    let inputs: Vec<Vec<Token>> = conversations.iter().map(|c| c.tokens(&lex)).collect();
    let preds = predictions(&model, &lex, &inputs).map_err(|e| Failure::from_lib(a.model.display(), e))?;
    for (c, p) in conversations.iter_mut().zip(preds) {
        c.label = Some(p);
    }
    let mut buf = Vec::new();
    in_file(&a.data, dataio::write_dataset(&conversations, &mut buf))?;
    emit(&a.output, &String::from_utf8_lossy(&buf))
}

/// Word pairs whose similarity contrasts the two kinds of embedding.
pub const DEFAULT_PAIRS: [(&str, &str); 3] = [("depression", ":'("), ("happy", "sad"), ("best", "great")];

fn embcos(a: EmbcosArgs) -> Outcome {
    let lex = lexicon(&a.lexicon)?;
    let sem_path = need(&a.embeddings.semantic, "--semantic", "for embcos")?;
    let sent_path = need(&a.embeddings.sentiment, "--sentiment", "for embcos")?;
    let (sem, sent) = (table(sem_path, "semantic")?, table(sent_path, "sentiment")?);
    let pairs: Vec<(String, String)> = match &a.pairs {
        None => DEFAULT_PAIRS.iter().map(|(x, y)| (x.to_string(), y.to_string())).collect(),
        Some(p) => {
            let mut v = Vec::new();
            for (n, line) in open(p)?.lines().enumerate() {
                let line = line.map_err(|e| Failure::from_lib(p.display(), e.into()))?;
                if line.trim().is_empty() || line.starts_with('#') {
                    continue;
                }
                let (x, y) = line.split_once('\t').ok_or_else(|| Failure {
                    code: EXIT_DATA,
                    message: format!("{}, line {}: expected word<TAB>word", p.display(), n + 1),
                })?;
                v.push((x.trim().to_string(), y.trim().to_string()));
            }
            v
        }
    };
    // emoticon variants are looked up under their canonical form
    let key = |w: &str| lex.canonical(w).unwrap_or(w).to_string();
    let mut out = String::from("word_a\tword_b\tsemantic\tsentiment\n");
    for (x, y) in &pairs {
        let (kx, ky) = (key(x), key(y));
        let cell = |t: &EmbeddingTable| -> Result<String, Failure> {
            if !t.contains(&kx) || !t.contains(&ky) {
                return Ok("oov".into());
            }
            let c = cosine(&t.lookup_str(&kx), &t.lookup_str(&ky)).map_err(|e| Failure::from_lib(t.name(), e))?;
            Ok(format!("{c:.4}"))
        };
        let (s1, s2) = (cell(&sem)?, cell(&sent)?);
        out.push_str(&format!("{x}\t{y}\t{s1}\t{s2}\n"));
    }
    emit(&a.output, &out)
}

fn mine(a: MineArgs) -> Outcome {
    let lex = lexicon(&a.lexicon)?;
    let cfg = a.config();
    let seeds = lines(&a.seeds, &lex)?;
    let mode = match a.mode {
        MineMode::T1 => "--mode t1",
        MineMode::T2 => "--mode t2",
        MineMode::Neg => "--mode neg",
    };
    let mut out = Vec::new();
    match a.mode {
        MineMode::T1 => {
            let pool = lines(need(&a.pool, "--pool", mode)?, &lex)?;
            let emb_path = need(&a.embeddings, "--embeddings", mode)?;
            let target = *need(&a.target, "--target", mode)?;
            let t = table(emb_path, "embeddings")?;
            let found = mine_candidates(&seeds, &pool, &t, &cfg).map_err(|e| Failure::from_lib(mode, e))?;
            let pruned = prune_heuristics(found, target, &lex, &cfg).map_err(|e| Failure::from_lib("--target", e))?;
            write_judge_queue(&JudgeRow::from_pruned(&pruned, &seeds), &mut out).map_err(|e| Failure::from_lib(mode, e))?;
        }
        MineMode::T2 => {
            let path = need(&a.pairs, "--pairs", mode)?;
            let pairs = in_file(path, read_pairs(open(path)?, &lex))?;
            let known: HashSet<String> = seeds.iter().map(|s| serialize(s)).collect();
            for r in mine_by_response(&pairs, &known, &cfg) {
                out.extend_from_slice(format!("{}\t{}\t{}\n", serialize(&r.q), r.response, r.frequency).as_bytes());
            }
        }
        MineMode::Neg => {
            let pool = lines(need(&a.pool, "--pool", mode)?, &lex)?;
            let emb_path = need(&a.embeddings, "--embeddings", mode)?;
            let n = *need(&a.count, "--count", mode)?;
            let t = table(emb_path, "embeddings")?;
            let picked = sample_negatives(&pool, &seeds, &t, &cfg, n, a.seed).map_err(|e| Failure::from_lib(mode, e))?;
            for i in picked {
                out.extend_from_slice(format!("{}\n", serialize(&pool[i])).as_bytes());
            }
        }
    }
    emit(&a.output, &String::from_utf8_lossy(&out))
}

fn stats(a: StatsArgs) -> Outcome {
    let data = labeled(&a.data)?;
    emit(&a.output, &dataset_stats(data.labels()).render())
}

fn kappa(a: KappaArgs) -> Outcome {
    let j = in_file(&a.judgments, read_judgments(open(&a.judgments)?))?;
    let k = in_file(&a.judgments, j.kappa())?;
    let split = j.items.iter().filter(|(_, r)| dataio::majority(r) == dataio::Majority::NoMajority).count();
    emit(
        &a.output,
        &format!("items\t{}\njudges\t{}\nkappa\t{k:.4}\nno_majority\t{split}\n", j.items.len(), j.judges),
    )
}

fn gradcheck(a: GradcheckArgs) -> Outcome {
    let lex = lexicon(&a.lexicon)?;
    let data = labeled(&a.data)?;
    let model = match &a.model {
        Some(p) => match load_model(p, &a.embeddings, &lex)? {
            Loaded::Neural(m) => m,
            _ => return Err(Failure::usage(format!("{}: gradcheck needs an sslstm checkpoint", p.display()))),
        },
        None => {
            let (sem, sent) = tables(&a.embeddings)?;
            SsLstm::init(a.net.config(), sem, sent, a.seed).map_err(|e| Failure::from_lib("model configuration", e))?
        }
    };
    let mut out = String::from("example\tchecked\tmax_relative_error\tworst\n");
    let mut failed = Vec::new();
    for (i, ex) in data.examples(&lex).iter().take(a.examples).enumerate() {
        let r = gradient_check(&model, ex, a.epsilon, a.seed).map_err(|e| Failure::from_lib(format!("example {}", i + 1), e))?;
        out.push_str(&format!(
            "{}\t{}\t{:.3e}\t{}\n",
            i + 1,
            r.checked,
            r.max_relative_error,
            r.worst.as_deref().unwrap_or("-")
        ));
        if !r.passes(a.tolerance) {
            failed.push(i + 1);
        }
    }
    emit(&a.output, &out)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_NUMERIC,
            message: format!("relative error above {} on examples {failed:?}", a.tolerance),
        })
    }
}
