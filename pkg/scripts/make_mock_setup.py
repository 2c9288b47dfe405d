"""Write a two-cluster mock corpus and print the path of its setup.ini.

    python3 scripts/make_mock_setup.py work/demo
    stratsched --config work/demo/setup.ini find-strategies
"""
import argparse

from stratsched.demo import write_two_cluster_corpus


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", help="directory to write into")
    ap.add_argument("--train", type=int, default=20, help="training problems per cluster")
    ap.add_argument("--test", type=int, default=5, help="held-out problems per cluster")
    ap.add_argument("--solve-time", type=float, default=2.0)
    ap.add_argument("--solve-time-b", type=float, default=None,
                    help="solve time of the B cluster (defaults to --solve-time)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    corpus = write_two_cluster_corpus(args.out, args.train, args.test, args.solve_time,
                                      args.seed, solve_time_b=args.solve_time_b)
    (corpus.root / "test_problems.txt").write_text("\n".join(corpus.test) + "\n")
    print(corpus.config)


if __name__ == "__main__":
    main()
