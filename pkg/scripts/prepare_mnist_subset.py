"""Write data/mnist5k-{images,labels}-idx*-ubyte from mlxtend's bundled MNIST sample."""

import argparse

from hqcc import mnist_subset

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    args = ap.parse_args()
    for p in mnist_subset.prepare(args.out):
        print(p)
