"""Command line entry point: ``docalign <stage> --config FILE [--out DIR] [--seed N]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .pipeline import STAGES, MissingArtifactError, run


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="docalign",
        description="Compare knowledge-unit coverage of Q&A posts and official documentation.",
    )
    parser.add_argument("stage", choices=STAGES + ("all",))
    parser.add_argument("--config", required=True, help="run configuration (JSON or TOML)")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="training seed (overrides the config)")
    parser.add_argument("-v", "--verbose", action="store_true")

    ing = parser.add_argument_group("ingest overrides")
    ing.add_argument("--dump", help="Stack Exchange Posts.xml")
    ing.add_argument("--forum-url", help="Discourse base URL")
    ing.add_argument("--category", help="Discourse category slug, e.g. help/5")
    ing.add_argument("--tags-include", type=_csv_list, help="comma-separated tags to add")
    ing.add_argument("--tags-exclude", type=_csv_list, help="comma-separated tags to drop")
    ing.add_argument("--tet", type=float, help="tag exclusivity threshold")
    ing.add_argument("--tst", type=float, help="tag significance threshold")
    ing.add_argument("--docs-root", help="root of the HTML documentation tree")

    pre = parser.add_argument_group("preprocess overrides")
    pre.add_argument("--min-df", type=int, help="minimum document frequency")
    pre.add_argument("--stoplist", help="stop-word file, one word per line")
    pre.add_argument("--lemma-table", help="gzip TSV of word<TAB>lemma")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, out_dir=args.out)
        cfg = cfg.with_overrides(
            seed=args.seed,
            dump=Path(args.dump).resolve() if args.dump else None,
            forum_url=args.forum_url,
            forum_category=args.category,
            tags_include=args.tags_include,
            tags_exclude=args.tags_exclude,
            tet=args.tet,
            tst=args.tst,
            docs_root=Path(args.docs_root).resolve() if args.docs_root else None,
            min_df=args.min_df,
            stoplist=Path(args.stoplist).resolve() if args.stoplist else None,
            lemma_table=Path(args.lemma_table).resolve() if args.lemma_table else None,
        )
        run(args.stage, cfg)
    except ConfigError as exc:
        print(f"docalign: {exc}", file=sys.stderr)
        return 2
    except MissingArtifactError as exc:
        print(f"docalign: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"docalign: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
