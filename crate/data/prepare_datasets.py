#!/usr/bin/env python3
"""Build the six bundled `smiles,value` regression datasets.

Sources are public data files shipped inside two PyPI packages, so the
build is reproducible offline from a package mirror:

  gauche==0.1.6 (sdist)   ESOL, FreeSolv, Lipophilicity (logD7.4)
  chemicals==1.5.2 (wheel) PhysProp logP, CRC boiling points,
                           Antoine vapour-pressure coefficients,
                           CAS -> SMILES identifier tables

Usage:
  pip download --no-deps gauche==0.1.6 chemicals==1.5.2 -d /tmp/src
  python3 data/prepare_datasets.py /tmp/src data/

Every SMILES is reduced to its largest fragment and written as RDKit
canonical SMILES without stereo, so identical compounds from different
sources share one string (the merge key used by `mtgnn`). The three
curated benchmark sets keep every source row, duplicates included; the
CAS-keyed sets keep the first value per structure.
"""

import csv
import glob
import gzip
import io
import math
import os
import sys
import tarfile
import zipfile

from rdkit import Chem, RDLogger
from rdkit.Chem.MolStandardize import rdMolStandardize

RDLogger.DisableLog("rdApp.*")

ROOM_T = 298.15
ANTOINE_SLACK = 30.0
PA_PER_MMHG = 133.322368
_chooser = rdMolStandardize.LargestFragmentChooser(preferOrganic=True)


def canon(smiles):
    mol = Chem.MolFromSmiles(smiles)
    if mol is None:
        return None
    mol = _chooser.choose(mol)
    if mol.GetNumAtoms() == 0:
        return None
    return Chem.MolToSmiles(mol, isomericSmiles=False)


def cas_int(cas):
    try:
        return int(str(cas).replace("-", ""))
    except ValueError:
        return None


def write(path, rows, dedupe=True):
    seen = set()
    kept = 0
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["smiles", "value"])
        for smi, val in rows:
            if smi is None or val is None or not math.isfinite(val):
                continue
            if dedupe and smi in seen:
                continue
            seen.add(smi)
            w.writerow([smi, repr(round(val, 6))])
            kept += 1
    print(f"{os.path.basename(path)}: {kept} rows, {len(seen)} distinct")


def read_member(archive, suffix):
    if archive.endswith(".whl"):
        z = zipfile.ZipFile(archive)
        name = next(n for n in z.namelist() if n.endswith(suffix))
        return z.read(name)
    t = tarfile.open(archive)
    name = next(n for n in t.getnames() if n.endswith(suffix))
    return t.extractfile(name).read()


def dict_rows(data, delimiter=","):
    return list(csv.DictReader(io.StringIO(data.decode("utf-8")), delimiter=delimiter))


def identifier_map(chem):
    out = {}
    for suffix in [
        "chemical identifiers pubchem large.tsv",
        "chemical identifiers pubchem small.tsv",
        "chemical identifiers example user db.tsv",
    ]:
        for line in read_member(chem, suffix).decode("utf-8").splitlines():
            cols = line.split("\t")
            if len(cols) < 5 or not cols[4]:
                continue
            key = cas_int(cols[1])
            if key is not None and key not in out:
                out[key] = cols[4]
    return out


def antoine_log10_mmhg(rows, form):
    out = {}
    for r in rows:
        try:
            a, b, c = float(r["A"]), float(r["B"]), float(r["C"])
            tmin, tmax = float(r["Tmin"]), float(r["Tmax"])
        except (KeyError, ValueError):
            continue
        if not (tmin - ANTOINE_SLACK <= ROOM_T <= tmax + ANTOINE_SLACK):
            continue
        if ROOM_T + c <= 0.0:
            continue
        x = a - b / (ROOM_T + c)
        log10_pa = x / math.log(10.0) if form == "ln_pa" else x
        log10_mmhg = log10_pa - math.log10(PA_PER_MMHG)
        # outside this window the fit is being extrapolated past any physical range
        if -15.0 <= log10_mmhg <= 5.0:
            out.setdefault(cas_int(r["CAS"]), log10_mmhg)
    return out


def main(src, dst):
    gauche = glob.glob(os.path.join(src, "gauche-*.tar.gz"))[0]
    chem = glob.glob(os.path.join(src, "chemicals-*.whl"))[0]
    os.makedirs(dst, exist_ok=True)

    esol = dict_rows(read_member(gauche, "property_prediction/ESOL.csv"))
    write(
        os.path.join(dst, "esol.csv"),
        [(canon(r["smiles"]), float(r["measured log solubility in mols per litre"])) for r in esol],
        dedupe=False,
    )
    fs = dict_rows(read_member(gauche, "property_prediction/FreeSolv.csv"))
    write(
        os.path.join(dst, "freesolv.csv"),
        [(canon(r["smiles"]), float(r["expt"])) for r in fs],
        dedupe=False,
    )
    lipo = dict_rows(read_member(gauche, "property_prediction/Lipophilicity.csv"))
    write(
        os.path.join(dst, "logd74.csv"),
        [(canon(r["smiles"]), float(r["exp"])) for r in lipo],
        dedupe=False,
    )

    ids = identifier_map(chem)

    def by_cas(pairs):
        rows = []
        for key, val in pairs:
            smi = ids.get(key)
            rows.append((canon(smi) if smi else None, val))
        return rows

    syrres = dict_rows(gzip.decompress(read_member(chem, "Syrres logP data.csv.gz")), "\t")
    crc_logp = dict_rows(read_member(chem, "CRC logP table.tsv"), "\t")
    logp = [(cas_int(r["CAS"]), float(r["logP"])) for r in syrres]
    logp += [(cas_int(r["CAS"]), float(r["logP"])) for r in crc_logp if r.get("logP")]
    write(os.path.join(dst, "logp.csv"), by_cas(logp))

    crc = dict_rows(read_member(chem, "Physical Constants of Organic Compounds.csv"), "\t")
    bp = [(cas_int(r["CAS"]), float(r["Tb"]) - 273.15) for r in crc if r["Tb"]]
    write(os.path.join(dst, "bp.csv"), by_cas(bp))

    vp = {}
    for suffix, form in [
        ("Landolt_antoine_V20.tsv", "ln_pa"),
        ("Antoine Collection Poling.tsv", "log10_pa"),
    ]:
        for k, v in antoine_log10_mmhg(dict_rows(read_member(chem, suffix), "\t"), form).items():
            vp.setdefault(k, v)
    write(os.path.join(dst, "logvp.csv"), by_cas(sorted(vp.items())))


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2])
