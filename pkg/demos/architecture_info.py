"""Tour of the network architecture: layers, parameters, bytes, FLOPs.

Everything printed here comes from the config file alone -- no weights are
needed to reason about shapes and cost.
"""

import littleyolo as ly


def main():
    specs = ly.load_config(ly.reference_config_path(416))
    graph = ly.build_graph(specs)

    print(ly.layer_table(graph))
    print()

    params = ly.param_count(graph)
    nbytes = ly.model_bytes(graph)
    print(f"parameters        : {params:,}")
    print(f"weights file      : {nbytes:,} bytes ({nbytes / 1e6:.2f} MB)")
    print(f"conv flops        : {ly.flops(graph):.3f} B")
    print(f"detection heads   : {[l.out_shape for l in graph.yolo_layers]}")
    print()

    # The 640 variant keeps the wiring and just rescales grids and anchors.
    g640 = ly.build_graph(ly.load_config(ly.reference_config_path(640)))
    print("640-input variant:")
    print(f"parameters        : {ly.param_count(g640):,} (unchanged)")
    print(f"conv flops        : {ly.flops(g640):.3f} B")
    print(f"detection heads   : {[l.out_shape for l in g640.yolo_layers]}")


if __name__ == "__main__":
    main()
