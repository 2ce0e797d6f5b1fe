"""Merge rules for the 2D parallel scan, as data.

A parent block at level ``l+1`` is made of four level-``l`` children::

    A = (2x, 2y)     B = (2x+1, 2y)
    C = (2x, 2y+1)   D = (2x+1, 2y+1)

Boundary halves: the parent's left-in rows and right-out rows split into
``lo`` (children A/B row range) and ``hi`` (C/D). Top-in and bottom-out columns
split into ``lo`` (A/C column range) and ``hi`` (B/D).

Tensor names, travel directions ``r`` (rightward edge) and ``d`` (downward):

    S_r, S_d            node -> right-out / bottom-out boundary
    T_rr, T_dr          left-in -> right-out, top-in -> right-out
    T_rd, T_dd          left-in -> bottom-out, top-in -> bottom-out
    M_r, M_d            left-in / top-in boundary -> node
    G                   node -> node

Each rule maps a block key to a list of terms; a term is a chain of child
tensors contracted over consecutive boundary indices. A key missing from a
rule is a zero block.
"""

CHILDREN = {"A": (0, 0), "B": (1, 0), "C": (0, 1), "D": (1, 1)}

# Transition rules: (in_half, out_half) -> terms
T_RULES = {
    "T_rr": {
        ("lo", "lo"): [("A.T_rr", "B.T_rr")],
        ("lo", "hi"): [("A.T_rr", "B.T_rd", "D.T_dr"), ("A.T_rd", "C.T_dr", "D.T_rr")],
        ("hi", "hi"): [("C.T_rr", "D.T_rr")],
    },
    "T_dr": {
        ("lo", "lo"): [("A.T_dr", "B.T_rr")],
        ("lo", "hi"): [("A.T_dr", "B.T_rd", "D.T_dr"), ("A.T_dd", "C.T_dr", "D.T_rr")],
        ("hi", "lo"): [("B.T_dr",)],
        ("hi", "hi"): [("B.T_dd", "D.T_dr")],
    },
    "T_rd": {
        ("lo", "lo"): [("A.T_rd", "C.T_dd")],
        ("lo", "hi"): [("A.T_rr", "B.T_rd", "D.T_dd"), ("A.T_rd", "C.T_dr", "D.T_rd")],
        ("hi", "lo"): [("C.T_rd",)],
        ("hi", "hi"): [("C.T_rr", "D.T_rd")],
    },
    "T_dd": {
        ("lo", "lo"): [("A.T_dd", "C.T_dd")],
        ("lo", "hi"): [("A.T_dr", "B.T_rd", "D.T_dd"), ("A.T_dd", "C.T_dr", "D.T_rd")],
        ("hi", "hi"): [("B.T_dd", "D.T_dd")],
    },
}

# Source rules: (child holding the node, out_half) -> terms
S_RULES = {
    "S_r": {
        ("A", "lo"): [("A.S_r", "B.T_rr")],
        ("A", "hi"): [("A.S_r", "B.T_rd", "D.T_dr"), ("A.S_d", "C.T_dr", "D.T_rr")],
        ("B", "lo"): [("B.S_r",)],
        ("B", "hi"): [("B.S_d", "D.T_dr")],
        ("C", "hi"): [("C.S_r", "D.T_rr")],
        ("D", "hi"): [("D.S_r",)],
    },
    "S_d": {
        ("A", "lo"): [("A.S_d", "C.T_dd")],
        ("A", "hi"): [("A.S_r", "B.T_rd", "D.T_dd"), ("A.S_d", "C.T_dr", "D.T_rd")],
        ("B", "hi"): [("B.S_d", "D.T_dd")],
        ("C", "lo"): [("C.S_d",)],
        ("C", "hi"): [("C.S_r", "D.T_rd")],
        ("D", "hi"): [("D.S_d",)],
    },
}

# Mark rules: (child holding the node, in_half) -> terms
M_RULES = {
    "M_r": {
        ("A", "lo"): [("A.M_r",)],
        ("B", "lo"): [("A.T_rr", "B.M_r")],
        ("C", "lo"): [("A.T_rd", "C.M_d")],
        ("C", "hi"): [("C.M_r",)],
        ("D", "lo"): [("A.T_rr", "B.T_rd", "D.M_d"), ("A.T_rd", "C.T_dr", "D.M_r")],
        ("D", "hi"): [("C.T_rr", "D.M_r")],
    },
    "M_d": {
        ("A", "lo"): [("A.M_d",)],
        ("B", "lo"): [("A.T_dr", "B.M_r")],
        ("B", "hi"): [("B.M_d",)],
        ("C", "lo"): [("A.T_dd", "C.M_d")],
        ("D", "lo"): [("A.T_dr", "B.T_rd", "D.M_d"), ("A.T_dd", "C.T_dr", "D.M_r")],
        ("D", "hi"): [("B.T_dd", "D.M_d")],
    },
}

# Gating rules: (source child, target child) -> terms
G_RULES = {
    ("A", "A"): [("A.G",)],
    ("B", "B"): [("B.G",)],
    ("C", "C"): [("C.G",)],
    ("D", "D"): [("D.G",)],
    ("A", "B"): [("A.S_r", "B.M_r")],
    ("A", "C"): [("A.S_d", "C.M_d")],
    ("A", "D"): [("A.S_r", "B.T_rd", "D.M_d"), ("A.S_d", "C.T_dr", "D.M_r")],
    ("B", "D"): [("B.S_d", "D.M_d")],
    ("C", "D"): [("C.S_r", "D.M_r")],
}

# Which child's boundary each half of a parent boundary belongs to.
IN_LEFT = {"lo": "A", "hi": "C"}
IN_TOP = {"lo": "A", "hi": "B"}
OUT_RIGHT = {"lo": "B", "hi": "D"}
OUT_BOTTOM = {"lo": "C", "hi": "D"}
