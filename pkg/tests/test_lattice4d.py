import numpy as np
import pytest

from dissmem import lattice4d
from dissmem.lattice4d import (CUBE_MASKS, EDGE_MASKS, FACE_MASKS, CellId,
                               build, cube_faces, dual, edge_faces,
                               face_cubes, face_edges, mask_directions)


def brute_force_face_edges(N, v, p):
    """Independent enumeration of a face's edge boundary from the geometric
    definition: the edges of the unit square spanned by the two directions."""
    a, b = mask_directions(p)

    def add(v, d):
        w = list(v)
        w[d] = (w[d] + 1) % N
        return tuple(w)

    return [(v, 1 << a), (v, 1 << b), (add(v, b), 1 << a), (add(v, a), 1 << b)]


class TestBuild:
    def test_counts_n3(self):
        lat = build(3)
        assert lat.n_faces == 486
        assert lat.n_edges == 324
        assert lat.n_cubes == 324

    def test_counts_n1(self):
        lat = build(1)
        assert (lat.n_faces, lat.n_edges, lat.n_cubes) == (6, 4, 4)
        for f in range(6):
            for e in lat.face_edge_table[f]:
                assert lat.edge_cell(e).vertex == (0, 0, 0, 0)

    def test_rejects_n0(self):
        with pytest.raises(ValueError):
            build(0)

    def test_edges_have_6_distinct_faces_n2(self):
        lat = build(2)
        for e in range(lat.n_edges):
            faces = lat.edge_face_table[e]
            assert len(set(faces.tolist())) == 6
            # cross-check against brute force: all faces whose edge list
            # contains e
            containing = set(np.nonzero((lat.face_edge_table == e)
                                        .any(axis=1))[0].tolist())
            assert set(faces.tolist()) == containing


class TestFaceEdges:
    def test_spec_example_origin(self):
        lat = build(3)
        f = CellId((0, 0, 0, 0), 0b0011)
        lower0, lower1, upper0, upper1 = face_edges(lat, f)
        assert lower0 == CellId((0, 0, 0, 0), 0b0001)
        assert lower1 == CellId((0, 0, 0, 0), 0b0010)
        assert upper0 == CellId((0, 1, 0, 0), 0b0001)
        assert upper1 == CellId((1, 0, 0, 0), 0b0010)

    def test_wraps_mod_n(self):
        lat = build(3)
        f = CellId((2, 2, 0, 0), 0b0011)
        edges = face_edges(lat, f)
        assert edges[2].vertex == (2, 0, 0, 0)
        assert edges[3].vertex == (0, 2, 0, 0)

    def test_matches_brute_force_n3(self):
        lat = build(3)
        for p in FACE_MASKS:
            for vi in range(lat.n_vertices):
                v = lat.index_vertex(vi)
                got = [(e.vertex, e.orientation)
                       for e in face_edges(lat, CellId(v, p))]
                assert got == brute_force_face_edges(3, v, p)

    def test_lower_edges_share_base_vertex(self):
        lat = build(2)
        for fi in range(lat.n_faces):
            f = lat.face_cell(fi)
            e0, e1 = face_edges(lat, f)[:2]
            assert e0.vertex == f.vertex
            assert e1.vertex == f.vertex

    def test_rejects_non_face(self):
        lat = build(2)
        with pytest.raises(ValueError):
            face_edges(lat, CellId((0, 0, 0, 0), 0b0001))

    def test_cross_consistency_with_edge_faces_n2(self):
        lat = build(2)
        for fi in range(lat.n_faces):
            f = lat.face_cell(fi)
            for e in face_edges(lat, f):
                assert f in edge_faces(lat, e)


class TestEdgeFaces:
    def test_spec_example(self):
        lat = build(3)
        faces = edge_faces(lat, CellId((0, 0, 0, 0), 0b0001))
        expected = {
            ((0, 0, 0, 0), 0b0011), ((0, 2, 0, 0), 0b0011),
            ((0, 0, 0, 0), 0b0101), ((0, 0, 2, 0), 0b0101),
            ((0, 0, 0, 0), 0b1001), ((0, 0, 0, 2), 0b1001),
        }
        assert {(f.vertex, f.orientation) for f in faces} == expected

    def test_rejects_non_edge(self):
        lat = build(2)
        with pytest.raises(ValueError):
            edge_faces(lat, CellId((0, 0, 0, 0), 0b0011))


class TestFaceCubes:
    def test_lower_cubes_share_base_vertex(self):
        lat = build(3)
        f = CellId((0, 0, 0, 0), 0b0011)
        cubes = face_cubes(lat, f)
        assert cubes[0] == CellId((0, 0, 0, 0), 0b0111)
        assert cubes[1] == CellId((0, 0, 0, 0), 0b1011)

    def test_cross_consistency_with_cube_faces_n2(self):
        lat = build(2)
        for fi in range(lat.n_faces):
            f = lat.face_cell(fi)
            for c in face_cubes(lat, f):
                assert f in cube_faces(lat, c)

    def test_four_incident_cubes(self):
        lat = build(3)
        assert lat.face_cube_table.shape == (lat.n_faces, 4)


@pytest.mark.parametrize("N", [2, 3])
class TestBoundaryOfBoundary:
    def test_cube_faces_cancel_on_edges(self, N):
        # flipping all 6 faces of a cube toggles every incident edge an even
        # number of times
        lat = build(N)
        for ci in range(lat.n_cubes):
            counts = {}
            for fi in lat.cube_face_table[ci]:
                for e in lat.face_edge_table[fi]:
                    counts[int(e)] = counts.get(int(e), 0) + 1
            assert all(c == 2 for c in counts.values())
            assert len(counts) == 12 if N > 1 else True


class TestDual:
    def test_complement(self):
        lat = build(2)
        c = dual(lat, CellId((0, 1, 0, 1), 0b0011))
        assert c == CellId((0, 1, 0, 1), 0b1100)

    def test_involution_n2(self):
        lat = build(2)
        for fi in range(lat.n_faces):
            f = lat.face_cell(fi)
            assert dual(lat, dual(lat, f)) == f

    @pytest.mark.parametrize("N", [2, 3])
    def test_lower_relations_map_exactly(self, N):
        # the complement sends face->lower-edge onto face->lower-cube with
        # base vertices unchanged
        lat = build(N)
        for fi in range(lat.n_faces):
            f = lat.face_cell(fi)
            df = dual(lat, f)
            lower_edges = face_edges(lat, f)[:2]
            lower_cubes = face_cubes(lat, df)[:2]
            assert {dual(lat, e) for e in lower_edges} == set(lower_cubes)

    @pytest.mark.parametrize("N", [2, 3])
    def test_sector_permutations_are_incidence_isomorphisms(self, N):
        # the exact sector isomorphism combines the orientation complement
        # with vertex inversion; under it the full face<->edge incidence maps
        # onto face<->cube incidence, preserving the lower-side pair
        lat = build(N)
        fp = lat.face_sector_perm
        ec = lat.edge_cube_sector_perm
        for fi in range(lat.n_faces):
            image_edges = ec[lat.face_edge_table[fi]]
            expected = lat.face_cube_table[fp[fi]]
            assert set(image_edges[:2]) == set(expected[:2])
            assert set(image_edges) == set(expected)

    @pytest.mark.parametrize("N", [2, 3])
    def test_relabelled_dual_tables_equal_primal(self, N):
        # relabelling the face/cube incidence through the sector isomorphism
        # reproduces the face/edge tables entry for entry, so a seeded run on
        # the dual tables is the same computation bit for bit
        lat = build(N)
        fe, ef, sup = lat.sector_tables(dual=False)
        fe2, ef2, sup2 = lat.sector_tables(dual=True)
        assert np.array_equal(fe, fe2)
        assert np.array_equal(ef, ef2)
        assert np.array_equal(np.sort(sup, axis=1), np.sort(sup2, axis=1))

    def test_vertex_unchanged_complement_is_not_enough(self):
        # keeping the base vertex breaks the upper-side incidences for N > 2;
        # this pins why the sector map needs the inversion
        lat = build(3)
        n4 = lat.n_vertices
        broken = 0
        for fi in range(lat.n_faces):
            rank, vi = divmod(fi, n4)
            image_face = lat.face_dual_perm[fi]
            image_edges = lat.edge_to_cube_perm[lat.face_edge_table[fi]]
            if set(image_edges) != set(lat.face_cube_table[image_face]):
                broken += 1
        assert broken > 0


@pytest.mark.parametrize("N", [2, 3, 5])
class TestLogicalSupports:
    def test_plane_sizes_and_intersection(self, N):
        lat = build(N)
        for p_rank in range(6):
            xs = set(lat.xl_support[p_rank].tolist())
            zs = set(lat.zl_support[p_rank].tolist())
            assert len(xs) == N * N
            assert len(zs) == N * N
            inter = xs & zs
            assert inter == {p_rank * lat.n_vertices}

    def test_plane_crosses_stabilizers_evenly(self, N):
        # X-plane and any edge stabilizer share an even number of faces
        lat = build(N)
        for p_rank in range(6):
            xs = set(lat.xl_support[p_rank].tolist())
            for e in range(lat.n_edges):
                overlap = sum(int(f) in xs for f in lat.edge_face_table[e])
                assert overlap % 2 == 0


class TestCellId:
    def test_kind_from_orientation(self):
        assert CellId((0, 0, 0, 0), 0b0001).kind == "edge"
        assert CellId((0, 0, 0, 0), 0b0110).kind == "face"
        assert CellId((0, 0, 0, 0), 0b1110).kind == "cube"

    def test_invalid_orientation_rejected(self):
        with pytest.raises(ValueError):
            CellId((0, 0, 0, 0), 0b1111)
        with pytest.raises(ValueError):
            CellId((0, 0, 0, 0), 0b0000)

    def test_roundtrip_indexing(self):
        lat = build(3)
        for fi in (0, 100, 485):
            assert lat.face_index(lat.face_cell(fi)) == fi
        for ei in (0, 323):
            assert lat.edge_index(lat.edge_cell(ei)) == ei
        for ci in (0, 323):
            assert lat.cube_index(lat.cube_cell(ci)) == ci
