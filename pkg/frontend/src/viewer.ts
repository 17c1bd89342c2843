/** three.js scene wrapper: orbit controls, mesh swapping without camera reset. */

import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";

import type { MeshData } from "./types.js";

export class MeshViewer {
  private scene: THREE.Scene;
  private camera: THREE.PerspectiveCamera;
  private renderer: THREE.WebGLRenderer;
  private controls: OrbitControls;
  private mesh: THREE.Mesh | null = null;

  constructor(canvas: HTMLCanvasElement) {
    this.scene = new THREE.Scene();
    this.scene.background = new THREE.Color(0x14161a);

    this.camera = new THREE.PerspectiveCamera(45, 1.0, 0.01, 50);
    this.camera.position.set(1.7, -1.4, 1.3);
    this.camera.up.set(0, 0, 1);

    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);

    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.target.set(0.5, 0.5, 0.5);
    this.controls.update();

    this.scene.add(new THREE.HemisphereLight(0xf8f8ff, 0x303438, 1.1));
    const key = new THREE.DirectionalLight(0xffffff, 1.6);
    key.position.set(2, -3, 4);
    this.scene.add(key);

    const grid = new THREE.GridHelper(2, 20, 0x3a3f46, 0x24282e);
    grid.rotation.x = Math.PI / 2;
    grid.position.set(0.5, 0.5, 0);
    this.scene.add(grid);

    this.resize();
    window.addEventListener("resize", () => this.resize());
    this.renderer.setAnimationLoop(() => {
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
    });
  }

  private resize() {
    const canvas = this.renderer.domElement;
    const w = canvas.clientWidth || canvas.width;
    const h = canvas.clientHeight || canvas.height;
    this.renderer.setSize(w, h, false);
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
  }

  /** Swap the displayed mesh; the camera and orbit target stay put. */
  setMesh(data: MeshData) {
    if (this.mesh) {
      this.scene.remove(this.mesh);
      this.mesh.geometry.dispose();
    }
    const geometry = new THREE.BufferGeometry();
    const positions = new Float32Array(data.vertices.length * 3);
    data.vertices.forEach((v, i) => positions.set(v, i * 3));
    const indices = new Uint32Array(data.faces.length * 3);
    data.faces.forEach((f, i) => indices.set(f, i * 3));
    geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
    geometry.setIndex(new THREE.BufferAttribute(indices, 1));
    geometry.computeVertexNormals();

    const material = new THREE.MeshStandardMaterial({
      color: 0x7aa2d4,
      metalness: 0.08,
      roughness: 0.62,
      side: THREE.DoubleSide,
      flatShading: false,
    });
    this.mesh = new THREE.Mesh(geometry, material);
    this.scene.add(this.mesh);
  }
}
