"""Regenerate the bundled classification data files in src/desb/data/.

balance-scale and tic-tac-toe are fully determined by their defining rules
(torque comparison, legal tic-tac-toe endgames with x moving first), so they
are enumerated here. iris is converted from the copy shipped with
scikit-learn into the UCI text layout.
"""

import csv
import itertools
import os
import sys

DATA = os.path.join(os.path.dirname(__file__), "..", "src", "desb", "data")
LINES = [(0, 1, 2), (3, 4, 5), (6, 7, 8), (0, 3, 6), (1, 4, 7), (2, 5, 8), (0, 4, 8), (2, 4, 6)]


def balance_rows():
    for lw, ld, rw, rd in itertools.product(range(1, 6), repeat=4):
        left, right = lw * ld, rw * rd
        cls = "L" if left > right else "R" if left < right else "B"
        yield [cls, lw, ld, rw, rd]


def wins(board, p):
    return any(all(board[i] == p for i in line) for line in LINES)


def endgames():
    seen = set()

    def play(board, player):
        if wins(board, "x") or wins(board, "o") or "b" not in board:
            seen.add(tuple(board))
            return
        for i in range(9):
            if board[i] == "b":
                board[i] = player
                play(board, "o" if player == "x" else "x")
                board[i] = "b"

    play(["b"] * 9, "x")
    return seen


def tictactoe_rows():
    order = {"x": 0, "o": 1, "b": 2}
    boards = sorted(endgames(), key=lambda b: [order[c] for c in b])
    pos = [list(b) + ["positive"] for b in boards if wins(b, "x")]
    neg = [list(b) + ["negative"] for b in boards if not wins(b, "x")]
    return pos + neg


def iris_rows():
    import sklearn.datasets
    path = os.path.join(os.path.dirname(sklearn.datasets.__file__), "data", "iris.csv")
    names = ["Iris-setosa", "Iris-versicolor", "Iris-virginica"]
    with open(path) as fh:
        rows = list(csv.reader(fh))[1:]
    return [r[:4] + [names[int(r[4])]] for r in rows]


def write(name, rows):
    with open(os.path.join(DATA, name), "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


if __name__ == "__main__":
    write("balance-scale.data", balance_rows())
    write("tic-tac-toe.data", tictactoe_rows())
    write("iris.data", iris_rows())
    sys.exit(0)
