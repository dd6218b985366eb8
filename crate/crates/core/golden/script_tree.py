class Tree:

  goal = "serve the potpies on a plate"

  def __init__(self):
    # nodes
    begin = Node()
    take_pies_out_to_cool = Node()
    take_out_several_plates = Node()
    open_cabinet_drawer = Node()
    fill_pies_onto_plates_evenly = Node()
    begin_putting_pies_on_plates = Node()
    serve_potpies_on_plate = Node()

    # edges
    begin.children = [take_pies_out_to_cool, open_cabinet_drawer]
    take_pies_out_to_cool.children = [take_out_several_plates]
    open_cabinet_drawer.children = [take_out_several_plates]
    take_out_several_plates.children = [begin_putting_pies_on_plates,
                                        fill_pies_onto_plates_evenly]
    begin_putting_pies_on_plates.children = [serve_potpies_on_plate]
    fill_pies_onto_plates_evenly.children = [serve_potpies_on_plate]
    serve_potpies_on_plate.children = [end]
